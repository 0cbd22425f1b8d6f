"""
Scan Manager Module

Splits a prime scan into fixed blocks of the number line and runs them in a
spawn-context process pool. Blocks are merged in block order, so the records
do not depend on the worker count.
"""

import atexit
import logging
import multiprocessing
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional

from src.config import get_settings
from src.errors import RedlabError, ScanWorkerError
from src.loggers.app_logger import configure_worker_logging

##############################################################################
# Spawn context for child processes; workers re-import the package
##############################################################################
ctx = multiprocessing.get_context("spawn")

logger = logging.getLogger(__name__)

# numbers per block, not primes
BLOCK_SIZE = 1 << 17


def _scan_block_in_process(study, lo: int, hi: int, seed: int) -> Dict:
    """Child process entry point: scan the primes in [lo, hi)."""
    from src.lab import scan_range

    try:
        records = scan_range(study, lo, hi, seed)
        return {"success": True, "lo": lo, "records": records}
    except Exception as e:
        logger.exception("Error in scan worker for block [%d, %d)", lo, hi)
        exit_code = e.exit_code if isinstance(e, RedlabError) else None
        return {"success": False, "lo": lo, "error": f"{type(e).__name__}: {e}", "exit_code": exit_code}


class ScanManager:
    """
    Runs scans either inline (one thread) or on a process pool.
    Progress goes to an optional callback as dicts with `progress`, `message`
    and, on the last update, `complete`.
    """
    def __init__(self, threads: int = 1):
        self.threads = max(1, threads)
        self._pool: Optional[ProcessPoolExecutor] = None
        if self.threads > 1:
            settings = get_settings()
            self._pool = ProcessPoolExecutor(
                max_workers=self.threads,
                mp_context=ctx,
                initializer=configure_worker_logging,
                initargs=(str(settings.log_dir), "WARNING"),
            )
            atexit.register(self.shutdown)

    def shutdown(self):
        if self._pool is not None:
            self._pool.shutdown(wait=True)
            self._pool = None
            atexit.unregister(self.shutdown)

    @staticmethod
    def blocks(bound: int) -> List[tuple]:
        """Half-open blocks covering [2, bound]."""
        return [(lo, min(lo + BLOCK_SIZE, bound + 1)) for lo in range(2, bound + 1, BLOCK_SIZE)]

    def run(self, study, bound: int, seed: int = 0,
            progress_callback: Optional[Callable[[dict], None]] = None) -> list:
        blocks = self.blocks(bound)
        started = time.time()
        logger.info("Scanning %s up to %d in %d block(s) on %d worker(s)",
                    study.name, bound, len(blocks), self.threads)
        self._send_progress(study.name, progress_callback, 0, "Scanning...", extra={"bound": bound})

        results: Dict[int, list] = {}
        if self._pool is None:
            for done, (lo, hi) in enumerate(blocks, start=1):
                result = _scan_block_in_process(study, lo, hi, seed)
                self._collect(study.name, progress_callback, result, results)
                self._report_block(study.name, progress_callback, done, len(blocks), hi - 1)
        else:
            futures = [self._pool.submit(_scan_block_in_process, study, lo, hi, seed) for lo, hi in blocks]
            for done, future in enumerate(as_completed(futures), start=1):
                self._collect(study.name, progress_callback, future.result(), results)
                self._report_block(study.name, progress_callback, done, len(blocks), None)

        records = [record for lo, _ in blocks for record in results[lo]]
        elapsed = time.time() - started
        logger.info("Scan of %s up to %d finished: %d primes in %.1fs", study.name, bound, len(records), elapsed)
        self._send_progress(study.name, progress_callback, 100, "Complete",
                            extra={"complete": True, "success": True, "primes": len(records)})
        return records

    def _collect(self, name: str, callback, result: Dict, results: Dict[int, list]):
        if not result["success"]:
            logger.error("Scan block starting at %d failed: %s", result["lo"], result["error"])
            self._send_progress(name, callback, 100, "Error",
                                extra={"complete": True, "success": False, "error": result["error"]})
            raise ScanWorkerError(result["lo"], result["error"], result["exit_code"])
        results[result["lo"]] = result["records"]

    def _report_block(self, name: str, callback, done: int, total: int, reached: Optional[int]):
        extra = {"blocks_done": done, "blocks_total": total}
        if reached is not None:
            extra["reached"] = reached
        self._send_progress(name, callback, 100.0 * done / total, "Scanning...", extra=extra)

    def _send_progress(self, study_name: str, callback: Optional[Callable], progress: Optional[float],
                       message: Optional[str], extra: Optional[dict] = None):
        if callback is None:
            return
        data = {"study": study_name}
        if progress is not None:
            data["progress"] = progress
        if message is not None:
            data["message"] = message
        if extra:
            data.update(extra)
        try:
            callback(data)
        except Exception as e:
            logger.warning("Progress callback failed: %s", e)
