import tempfile
import unittest
from pathlib import Path

from src.errors import CacheError, CorruptCacheError, StaleCacheError
from src.groups import TorusTorsionClass
from src.lab import MatchList, run_scan, torus_study
from src.scan_cache import HEADER, cache_read, cache_write, read_header, study_hash


class TestScanCache(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "scan.rdl"
        torsion = (TorusTorsionClass((1,)), TorusTorsionClass((2,)))
        self.study = torus_study("pair", [[2], ["-3/5"]], [2, 3], matches=[MatchList(1, 2, torsion)])
        self.records = run_scan(self.study, 2000)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        cache_write(self.records, self.path, self.study, 2000)
        self.assertEqual(cache_read(self.path, self.study), self.records)
        header = read_header(self.path)
        self.assertEqual((header.bound, header.count), (2000, len(self.records)))
        self.assertEqual(header.study_hash, study_hash(self.study))
        self.assertEqual(header.valuation_columns, self.study.layout.valuation_columns)
        self.assertEqual(header.label_columns, ((2, 1),))

    def test_hash_ignores_targets(self):
        from src.structure import Target
        with_target = torus_study("pair", [[2], ["-3/5"]], [2, 3], [Target.of("t", {2: [0, 1]})],
                                  matches=self.study.matches)
        self.assertEqual(study_hash(with_target), study_hash(self.study))

    def test_changed_study_is_stale(self):
        cache_write(self.records, self.path, self.study, 2000)
        other = torus_study("pair", [[2], ["-3/7"]], [2, 3], matches=self.study.matches)
        with self.assertRaises(StaleCacheError):
            cache_read(self.path, other)

    def test_truncated_file_is_corrupt(self):
        cache_write(self.records, self.path, self.study, 2000)
        data = self.path.read_bytes()
        self.path.write_bytes(data[:-3])
        with self.assertRaises(CorruptCacheError):
            cache_read(self.path, self.study)
        self.path.write_bytes(data[:10])
        with self.assertRaises(CorruptCacheError):
            cache_read(self.path, self.study)

    def test_bad_magic_is_corrupt(self):
        cache_write(self.records, self.path, self.study, 2000)
        data = self.path.read_bytes()
        self.path.write_bytes(b"XXXX" + data[4:])
        with self.assertRaises(CorruptCacheError):
            cache_read(self.path, self.study)

    def test_other_version_is_stale(self):
        cache_write(self.records, self.path, self.study, 2000)
        data = bytearray(self.path.read_bytes())
        data[4:6] = (99).to_bytes(2, "little")
        self.path.write_bytes(bytes(data))
        with self.assertRaises(StaleCacheError):
            cache_read(self.path, self.study)
        self.assertGreater(len(data), HEADER.size)

    def test_stale_and_corrupt_are_cache_errors(self):
        self.assertTrue(issubclass(StaleCacheError, CacheError))
        self.assertTrue(issubclass(CorruptCacheError, CacheError))


if __name__ == '__main__':
    unittest.main()
