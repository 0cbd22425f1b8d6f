import csv
import json
import logging
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from src.cli import main
from src.report import Report

STUDIES = Path(__file__).parent / "studies"


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        root = Path(self.tmp.name)
        self.out = root / "results"
        self.cache = root / "cache"
        self.env = mock.patch.dict("os.environ", {
            "REDLAB_CACHE_DIR": str(self.cache),
            "REDLAB_LOG_DIR": str(root / "logs"),
            "REDLAB_LOG_LEVEL": "WARNING",
            "REDLAB_THREADS": "1",
        })
        self.env.start()

    def tearDown(self):
        root_logger = logging.getLogger()
        for handler in list(root_logger.handlers):
            root_logger.removeHandler(handler)
            handler.close()
        self.env.stop()
        self.tmp.cleanup()

    def run_cli(self, command, study, *extra):
        return main([command, "--study", str(STUDIES / study), "--out", str(self.out), "--no-progress", *extra])


class TestCommands(CliTestCase):
    def test_analyze(self):
        self.assertEqual(self.run_cli("analyze", "two_minus_two.study"), 0)
        data = json.loads((self.out / "two_minus_two-report.json").read_text())
        verdicts = {t["name"]: t["verdict"] for t in data["targets"]}
        self.assertEqual(verdicts, {"both_odd": "Finite", "both_even": "Finite", "split": "PositiveDensity"})
        self.assertEqual(data["targets"][2]["witness"], {"2": mock.ANY})

    def test_scan_csv_and_cache(self):
        self.assertEqual(self.run_cli("scan", "two.study", "--bound", "100"), 0)
        with open(self.out / "two-scan.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(list(rows[0]), ["p", "status", "reason", "v_l2_i1"])
        self.assertEqual(len(rows), 25)
        self.assertEqual(rows[0], {"p": "2", "status": "excluded", "reason": "studied_prime", "v_l2_i1": ""})
        self.assertEqual(rows[1], {"p": "3", "status": "included", "reason": "", "v_l2_i1": "1"})
        self.assertEqual(len(list(self.cache.glob("two-*-100.rdl"))), 1)
        self.assertEqual(self.run_cli("scan", "two.study", "--bound", "100"), 0)

    def test_curve_scan_with_labels(self):
        self.assertEqual(self.run_cli("scan", "five_torsion.study", "--bound", "200"), 0)
        with open(self.out / "five_torsion-scan.csv", newline="") as f:
            rows = list(csv.DictReader(f))
        self.assertEqual(list(rows[0]), ["p", "status", "reason", "v_l5_i1", "lpart_l5_i1"])
        by_p = {row["p"]: row for row in rows}
        self.assertEqual(by_p["11"]["reason"], "bad_reduction")
        self.assertEqual((by_p["13"]["v_l5_i1"], by_p["13"]["lpart_l5_i1"]), ("1", "1"))

    def test_density_agrees_with_oracle(self):
        self.assertEqual(self.run_cli("density", "two.study"), 0)
        report = Report.from_json((self.out / "two-report.json").read_text())
        odd = report.target("odd")
        self.assertEqual([e.bound for e in odd.estimates], [1000, 5000, 20000])
        self.assertEqual(str(odd.oracle), "7/24")
        self.assertTrue(odd.agreement)
        self.assertEqual(report.agreement_failures, [])

    def test_report_csv_regenerates_from_json(self):
        self.assertEqual(self.run_cli("report", "two.study", "--bound", "5000", "--checkpoints", "500,2000"), 0)
        report = Report.from_json((self.out / "two-report.json").read_text())
        self.assertEqual(report.to_csv(), (self.out / "two-report.csv").read_text())
        self.assertEqual(report.to_json(), (self.out / "two-report.json").read_text())

    def test_oracle(self):
        self.assertEqual(self.run_cli("oracle", "two_minus_two.study"), 0)
        data = json.loads((self.out / "two_minus_two-report.json").read_text())
        self.assertTrue(all(t["oracle"] is None for t in data["targets"]))


class TestExitCodes(CliTestCase):
    def test_parse_error(self):
        bad = Path(self.tmp.name) / "bad.study"
        bad.write_text("[points]\npoint R1 = 2\n[primes]\nS = 4\n")
        self.assertEqual(main(["analyze", "--study", str(bad), "--out", str(self.out)]), 2)

    def test_missing_study(self):
        self.assertEqual(self.run_cli("analyze", "missing.study"), 4)

    def test_budget(self):
        with mock.patch.dict("os.environ", {"REDLAB_TORUS_BOUND": "100"}):
            self.assertEqual(self.run_cli("scan", "two.study"), 5)

    def test_oracle_disagreement(self):
        # zero-width intervals: no estimate over pi(2000) = 303 primes equals 7/24 exactly
        with mock.patch("src.report.AGREEMENT_WIDTHS", 0.0):
            self.assertEqual(self.run_cli("density", "two.study", "--bound", "2000"), 3)
            report = Report.from_json((self.out / "two-report.json").read_text())
            self.assertIn("odd", report.agreement_failures)

    def test_corrupt_cache(self):
        self.assertEqual(self.run_cli("scan", "two.study", "--bound", "100"), 0)
        cached = next(self.cache.glob("two-*-100.rdl"))
        cached.write_bytes(b"junk")
        self.assertEqual(self.run_cli("scan", "two.study", "--bound", "100"), 4)

    def test_stale_cache_is_rescanned(self):
        self.assertEqual(self.run_cli("scan", "two.study", "--bound", "100"), 0)
        cached = next(self.cache.glob("two-*-100.rdl"))
        data = bytearray(cached.read_bytes())
        data[4:6] = (99).to_bytes(2, "little")
        cached.write_bytes(bytes(data))
        self.assertEqual(self.run_cli("scan", "two.study", "--bound", "100"), 0)
        self.assertEqual(cached.read_bytes()[4:6], (1).to_bytes(2, "little"))


if __name__ == '__main__':
    unittest.main()
