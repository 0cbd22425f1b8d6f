import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

# .env in the working directory, if any; real environment variables win
load_dotenv(override=False)


@dataclass(frozen=True)
class Settings:
    cache_dir: Path
    log_dir: Path
    log_level: str
    threads: int
    torus_bound: int
    curve_bound: int
    factor_trial_limit: int
    factor_max: int
    slow_tests: bool


def get_settings() -> Settings:
    """Read settings from the environment (after .env has been loaded)."""
    return Settings(
        cache_dir=Path(os.getenv("REDLAB_CACHE_DIR", ".redlab_cache")),
        log_dir=Path(os.getenv("REDLAB_LOG_DIR", "logs")),
        log_level=os.getenv("REDLAB_LOG_LEVEL", "INFO").upper(),
        threads=int(os.getenv("REDLAB_THREADS", 1)),
        torus_bound=int(os.getenv("REDLAB_TORUS_BOUND", 10_000_000)),
        curve_bound=int(os.getenv("REDLAB_CURVE_BOUND", 200_000)),
        factor_trial_limit=int(os.getenv("REDLAB_FACTOR_TRIAL_LIMIT", 1_000_000)),
        factor_max=int(os.getenv("REDLAB_FACTOR_MAX", 2**64)),
        slow_tests=os.getenv("REDLAB_SLOW_TESTS", "0").lower() in ("1", "true", "yes"),
    )
