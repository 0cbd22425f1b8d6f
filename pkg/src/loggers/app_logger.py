import logging
import sys
import time
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Optional

import colorlog

from src.config import get_settings

LOG_COLORS = {
    'DEBUG': 'cyan',
    'INFO': 'green',
    'WARNING': 'yellow',
    'ERROR': 'red',
    'CRITICAL': 'bold_red',
}


def configure_app_logging(force: bool = False, is_worker: bool = False,
                          console_level: Optional[str] = None,
                          log_dir: Optional[Path] = None):
    """
    Attach colorlog console output and rotating log files to the root logger.

    `force=True` replaces handlers that are already attached (the CLI calls it
    once per run, scan workers call it from the pool initializer).
    `is_worker=True` skips the start separator so worker processes do not
    stamp the log files again.
    """
    settings = get_settings()
    logs_dir = Path(log_dir or settings.log_dir)
    logs_dir.mkdir(parents=True, exist_ok=True)
    logging.captureWarnings(True)

    file_formatter = logging.Formatter(
        fmt='[%(asctime)s] [%(levelname)s] [%(processName)s] %(name)s: %(message)s',
        datefmt='%Y-%m-%dT%H:%M:%S'
    )

    console_formatter = colorlog.ColoredFormatter(
        fmt="%(log_color)s[%(asctime)s] [%(levelname)s]%(reset)s %(name)s: %(message)s",
        datefmt='%Y-%m-%d %H:%M:%S',
        log_colors=LOG_COLORS,
    )

    scan_handler = RotatingFileHandler(logs_dir / "scan.log", maxBytes=10 * 1024 * 1024, backupCount=5)
    scan_handler.setLevel(logging.INFO)
    scan_handler.setFormatter(file_formatter)

    error_handler = RotatingFileHandler(logs_dir / "error.log", maxBytes=10 * 1024 * 1024, backupCount=5)
    error_handler.setLevel(logging.WARNING)
    error_handler.setFormatter(file_formatter)

    debug_handler = RotatingFileHandler(logs_dir / "debug.log", maxBytes=10 * 1024 * 1024, backupCount=5)
    debug_handler.setLevel(logging.DEBUG)
    debug_handler.setFormatter(file_formatter)

    console_handler = logging.StreamHandler(sys.stdout)
    console_handler.setLevel(console_level or settings.log_level)
    console_handler.setFormatter(console_formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(logging.DEBUG)

    attached = False
    if force or not root_logger.handlers:
        if force:
            for h in list(root_logger.handlers):
                root_logger.removeHandler(h)
                h.close()

        root_logger.addHandler(scan_handler)
        root_logger.addHandler(error_handler)
        root_logger.addHandler(debug_handler)
        root_logger.addHandler(console_handler)
        attached = True

        if not is_worker:
            separator = "#" * 80
            current_time = time.strftime("%Y-%m-%d %H:%M:%S")
            separator_message = f"{separator}\n{current_time} - REDLAB START\n{separator}"
            # straight into the files, bypassing formatters
            for handler in (scan_handler, error_handler, debug_handler):
                handler.stream.write(f"{separator_message}\n")
                handler.stream.flush()
    else:
        # handlers we built but did not attach
        for handler in (scan_handler, error_handler, debug_handler):
            handler.close()

    if attached:
        logging.getLogger(__name__).debug("Logging configured (worker=%s, dir=%s).", is_worker, logs_dir)


def configure_worker_logging(log_dir: Optional[str] = None, console_level: Optional[str] = None):
    """Process-pool initializer: same handlers inside each spawned scan worker."""
    configure_app_logging(force=True, is_worker=True, console_level=console_level,
                          log_dir=Path(log_dir) if log_dir else None)
