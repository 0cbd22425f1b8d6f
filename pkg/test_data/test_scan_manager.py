import unittest
from unittest import mock

from src.errors import BudgetExhaustedError, RedlabError, ScanWorkerError
from src.scan_manager import ScanManager


class NamedOnly:
    """Pickles into a worker but has nothing to scan with."""

    def __init__(self, name):
        self.name = name


class OverBudget(NamedOnly):
    @property
    def layout(self):
        raise BudgetExhaustedError("layout refused")


class TestWorkerFailures(unittest.TestCase):
    def run_manager(self, study, threads):
        manager = ScanManager(threads)
        try:
            return manager.run(study, 50)
        finally:
            manager.shutdown()

    def test_failure_is_a_redlab_error(self):
        for threads in (1, 2):
            with self.assertRaises(ScanWorkerError) as cm:
                self.run_manager(NamedOnly("broken"), threads)
            self.assertIsInstance(cm.exception, RedlabError)
            self.assertEqual(cm.exception.exit_code, 4)
            self.assertEqual(cm.exception.lo, 2)

    def test_failure_keeps_lab_exit_code(self):
        for threads in (1, 2):
            with self.assertRaises(ScanWorkerError) as cm:
                self.run_manager(OverBudget("budget"), threads)
            self.assertEqual(cm.exception.exit_code, 5)

    def test_failure_reported_to_progress(self):
        updates = []
        with self.assertRaises(ScanWorkerError):
            ScanManager(1).run(NamedOnly("broken"), 50, progress_callback=updates.append)
        self.assertEqual(updates[-1]["success"], False)
        self.assertTrue(updates[-1]["complete"])


class TestShutdown(unittest.TestCase):
    def test_shutdown_releases_exit_hook(self):
        with mock.patch("src.scan_manager.atexit") as hooks:
            managers = [ScanManager(2) for _ in range(3)]
            for manager in managers:
                manager.shutdown()
                manager.shutdown()
        self.assertEqual(hooks.register.call_count, 3)
        self.assertEqual(hooks.unregister.call_count, 3)
        for manager, call in zip(managers, hooks.unregister.call_args_list):
            self.assertEqual(call.args[0], manager.shutdown)

    def test_inline_manager_registers_nothing(self):
        with mock.patch("src.scan_manager.atexit") as hooks:
            ScanManager(1).shutdown()
        hooks.register.assert_not_called()


if __name__ == '__main__':
    unittest.main()
