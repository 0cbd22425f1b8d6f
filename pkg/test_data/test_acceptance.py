import itertools
import unittest
from fractions import Fraction

from src.config import get_settings
from src.groups import CurvePointQ, FactoredRational, WeierstrassCurve
from src.kummer import exact_density
from src.lab import ScanSettings, curve_study, run_scan, tally, torus_study
from src.structure import Target, Verdict, decide_criterion
from src.study_file import parse_study

SLOW = get_settings().slow_tests
THREADS = max(2, get_settings().threads)

RANK_THREE_PAIR = """
[points]
curve E = [0,0,1,-7,6]
let P1 = E(1, 0)
let P2 = E(2, 0)
let P3 = E(0, 2)
point R1 = P1
point R2 = P2

[presentation]
generators = P1, P2, P3

[primes]
S = 2
"""


def pair_targets(limit):
    return [Target.of(f"t{a}{b}", {2: [a, b]}) for a, b in itertools.product(range(limit + 1), repeat=2)]


class TestComponentObstruction(unittest.TestCase):
    FINITE = [(0, 0), (1, 1)]
    POSITIVE = [(1, 0), (0, 1), (2, 2)]

    def check(self, bound, min_matches):
        study = torus_study("pair", [[2], [-2]], [2])
        records = run_scan(study, bound, threads=THREADS if bound > 10**5 else 1)
        tail = [r for r in records if r.p > 1000]
        for a, b in self.FINITE:
            target = Target.of("t", {2: [a, b]})
            self.assertEqual(decide_criterion(study.presentation, target).verdict, Verdict.FINITE)
            self.assertEqual(tally(tail, target).matches, 0, (a, b))
        for a, b in self.POSITIVE:
            target = Target.of("t", {2: [a, b]})
            self.assertEqual(decide_criterion(study.presentation, target).verdict, Verdict.POSITIVE_DENSITY)
            self.assertGreaterEqual(tally(records, target).matches, min_matches, (a, b))
        total = sum(tally(records, t).estimate for t in pair_targets(8))
        self.assertAlmostEqual(total, 1.0, delta=0.01)

    def test_small(self):
        self.check(10**5, 50)

    @unittest.skipUnless(SLOW, "REDLAB_SLOW_TESTS not set")
    def test_million(self):
        self.check(10**6, 500)


class TestOracleAgreement(unittest.TestCase):
    CASES = [(2, 2, 0, Fraction(7, 24)), (3, 2, 0, Fraction(1, 3)),
             (2, 3, 0, Fraction(5, 8)), (2, 3, 1, Fraction(1, 4)), (2, 3, 2, Fraction(1, 12))]

    def test_exact_values(self):
        for r, ell, a, expected in self.CASES:
            self.assertEqual(exact_density(FactoredRational.from_fraction(r), ell, a), expected, (r, ell, a))

    def check(self, bound, tolerance):
        for r, ell, a, expected in self.CASES:
            study = torus_study(f"r{r}", [[r]], [ell])
            records = run_scan(study, bound, threads=THREADS if bound > 10**5 else 1)
            estimate = tally(records, Target.of("t", {ell: [a]})).estimate
            self.assertAlmostEqual(estimate, float(expected), delta=tolerance, msg=(r, ell, a))

    def test_small(self):
        self.check(10**5, 0.03)

    @unittest.skipUnless(SLOW, "REDLAB_SLOW_TESTS not set")
    def test_ten_million(self):
        self.check(10**7, 0.005)


class TestRankThreeCurve(unittest.TestCase):
    def setUp(self):
        self.study = parse_study(RANK_THREE_PAIR, "rank3")

    def test_all_targets_positive(self):
        for target in pair_targets(2):
            verdict = decide_criterion(self.study.presentation, target)
            self.assertEqual(verdict.verdict, Verdict.POSITIVE_DENSITY, target)
            self.assertTrue(verdict.conditional)

    @unittest.skipUnless(SLOW, "REDLAB_SLOW_TESTS not set")
    def test_match_counts_grow(self):
        records = run_scan(self.study, 2 * 10**5, threads=THREADS)
        for target in pair_targets(2):
            early = tally(records, target, bound=10**5).matches
            late = tally(records, target).matches
            self.assertGreater(early, 0, target.name)
            self.assertGreater(late, early, target.name)


class TestTorsionInvariance(unittest.TestCase):
    @unittest.skipUnless(SLOW, "REDLAB_SLOW_TESTS not set")
    def test_order_five_below_hundred_thousand(self):
        curve = WeierstrassCurve(0, -1, 1, -10, -20)
        T = CurvePointQ.on(curve, 5, 5)
        study = curve_study("torsion", curve, [[T]], [5], scan=ScanSettings(exhaustive_below=100))
        records = run_scan(study, 10**5, threads=THREADS)
        violations = [r.p for r in records if r.included and r.valuation(5, 0) != 1]
        self.assertEqual(violations, [])


if __name__ == '__main__':
    unittest.main()
