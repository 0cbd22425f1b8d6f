"""
Command line: analyze, scan, density, oracle and report subcommands over a
study file. Exit codes: 0 ok, 2 configuration, 3 agreement or consistency
failure, 4 I/O, cache or scan worker, 5 budget.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from src.config import get_settings
from src.errors import BudgetExhaustedError, ConfigurationError, RedlabError, StaleCacheError
from src.lab import ScanRecord, Study, StudyKind, run_scan
from src.loggers.app_logger import configure_app_logging
from src.loggers.progress_logger import ProgressLogger
from src.report import Report, build_report, oracle_density
from src.scan_cache import cache_read, cache_write, study_hash
from src.structure import CriterionVerdict, Verdict, decide_criterion
from src.study_file import load_study

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_AGREEMENT = 3
EXIT_IO = 4


def _checkpoints(text: str) -> List[int]:
    try:
        values = sorted(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--checkpoints must be a comma-separated list of integers (got {text!r})")
    if not values or values[0] < 2:
        raise argparse.ArgumentTypeError("checkpoints must be at least 2")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--study", required=True, type=Path, help="Study file.")
    common.add_argument("--bound", type=int, default=None, help="Prime bound X (default: study, then environment).")
    common.add_argument("--out", type=Path, default=Path("results"), help="Output directory (default results).")
    common.add_argument("--checkpoints", type=_checkpoints, default=None, help="Comma-separated bounds, e.g. 1000,10000.")
    common.add_argument("--seed", type=int, default=None, help="Seed for random points in group-order computations.")
    common.add_argument("--threads", type=int, default=None, help="Scan worker processes.")
    common.add_argument("--no-progress", action="store_true", help="Log progress without a progress bar.")

    ap = argparse.ArgumentParser(
        prog="redlab",
        description="Valuations of orders of reductions of points on tori and elliptic curves.")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="Decide finite / positive density for every target.")
    sub.add_parser("scan", parents=[common], help="Scan primes up to X and write the per-prime CSV.")
    sub.add_parser("density", parents=[common], help="Empirical densities per target at each checkpoint.")
    sub.add_parser("oracle", parents=[common], help="Exact densities from the Kummer model where it applies.")
    sub.add_parser("report", parents=[common], help="analyze + density + oracle in one report.")
    return ap


##############################################################################
# Helpers
##############################################################################

def scan_bound(study: Study, requested: Optional[int]) -> int:
    settings = get_settings()
    cap = settings.torus_bound if study.kind == StudyKind.TORUS else settings.curve_bound
    bound = requested or study.scan.bound or cap
    if bound < 2:
        raise ConfigurationError(f"bound {bound} is below 2")
    if bound > cap:
        variable = "REDLAB_TORUS_BOUND" if study.kind == StudyKind.TORUS else "REDLAB_CURVE_BOUND"
        raise BudgetExhaustedError(f"bound {bound} exceeds the scan budget {cap}; raise {variable} to go further")
    return bound


def cache_path(study: Study, bound: int) -> Path:
    return get_settings().cache_dir / f"{study.name}-{study_hash(study).hex()[:12]}-{bound}.rdl"


def load_or_scan(study: Study, bound: int, threads: Optional[int], seed: Optional[int],
                 show_bar: bool = True) -> List[ScanRecord]:
    path = cache_path(study, bound)
    if path.exists():
        try:
            records = cache_read(path, study)
            logger.info("Using cached scan %s (%d primes)", path, len(records))
            return records
        except StaleCacheError as e:
            logger.warning("Ignoring stale cache %s: %s", path, e)
    progress = ProgressLogger(show_bar=show_bar)
    try:
        records = run_scan(study, bound, threads or get_settings().threads, seed, progress)
    finally:
        progress.close()
    cache_write(records, path, study, bound)
    return records


def analyze(study: Study) -> Dict[str, CriterionVerdict]:
    verdicts = {}
    for target in study.targets:
        verdict = decide_criterion(study.presentation, target)
        verdicts[target.name] = verdict
        logger.debug("Target %s: %s", target.name, verdict.verdict.value)
    return verdicts


def write_scan_csv(records: Sequence[ScanRecord], study: Study, path: Path) -> Path:
    layout = study.layout
    columns = ["p", "status", "reason"]
    columns += [f"v_l{ell}_i{i + 1}" for ell, i in layout.valuation_columns]
    columns += [f"lpart_l{ell}_i{i + 1}" for ell, i in layout.label_columns]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for r in records:
            if r.included:
                labels = ["none" if label is None else label for label in r.labels]
                writer.writerow([r.p, "included", ""] + list(r.valuations) + labels)
            else:
                blanks = [""] * (len(layout.valuation_columns) + len(layout.label_columns))
                writer.writerow([r.p, "excluded", r.reason.value] + blanks)
    logger.info("Scan CSV written to %s (%d rows)", path, len(records))
    return path


def _print_verdicts(study: Study, verdicts: Dict[str, CriterionVerdict]):
    components = study.presentation.components
    parts = ", ".join(f"l={ell}: {n}" for ell, n in components.n_R_parts(study.primes).items())
    print(f"{study.name}: n_R = {components.n_R} ({parts})")
    for target in study.targets:
        verdict = verdicts[target.name]
        line = f"{target.name} [{target}]: {verdict.verdict.value}"
        if verdict.conditional:
            line += " (conditional on the declared presentation)"
        print(line)
        if verdict.verdict == Verdict.POSITIVE_DENSITY:
            for ell, witness in sorted(verdict.witness.items()):
                print(f"    l={ell}: witness {witness.describe()}")


def _print_report(report: Report):
    for t in report.targets:
        for e in t.estimates:
            print(f"{t.name} X={e.bound}: {e.matches}/{e.prime_count} = {e.estimate:.6f} "
                  f"+/- {e.half_width:.6f}")
        if t.verdict == Verdict.FINITE.value and t.final is not None and t.final.matches == 0:
            print(f"{t.name}: zero matches up to X={t.final.bound} (evidence, not a proof of finiteness)")
        if t.oracle is not None:
            status = {True: "ok", False: "FAIL", None: "n/a"}[t.agreement]
            print(f"{t.name} oracle: {t.oracle} = {float(t.oracle):.6f} (agreement {status})")


##############################################################################
# Subcommands
##############################################################################

def cmd_analyze(study: Study, args) -> int:
    verdicts = analyze(study)
    _print_verdicts(study, verdicts)
    build_report(study, verdicts).write(args.out)
    return EXIT_OK


def cmd_scan(study: Study, args) -> int:
    bound = scan_bound(study, args.bound)
    records = load_or_scan(study, bound, args.threads, args.seed, not args.no_progress)
    path = write_scan_csv(records, study, Path(args.out) / f"{study.name}-scan.csv")
    print(f"{len(records)} primes up to {bound}: {path}")
    return EXIT_OK


def _density_report(study: Study, args, verdicts=None, with_oracle: bool = True) -> Report:
    bound = scan_bound(study, args.bound)
    checkpoints = [c for c in (args.checkpoints or study.scan.checkpoints) if c <= bound]
    records = load_or_scan(study, bound, args.threads, args.seed, not args.no_progress)
    return build_report(study, verdicts, records, bound, checkpoints, with_oracle)


def _finish(report: Report, args) -> int:
    _print_report(report)
    report.write(args.out)
    failures = report.agreement_failures
    if failures:
        logger.error("Empirical densities disagree with the oracle for %s", ", ".join(failures))
        return EXIT_AGREEMENT
    return EXIT_OK


def cmd_density(study: Study, args) -> int:
    return _finish(_density_report(study, args), args)


def cmd_oracle(study: Study, args) -> int:
    for target in study.targets:
        value = oracle_density(study, target)
        if value is None:
            print(f"{target.name} [{target}]: no oracle (needs one torus coordinate and one l)")
        else:
            print(f"{target.name} [{target}]: {value} = {float(value):.6f}")
    build_report(study, with_oracle=True).write(args.out)
    return EXIT_OK


def cmd_report(study: Study, args) -> int:
    verdicts = analyze(study)
    _print_verdicts(study, verdicts)
    return _finish(_density_report(study, args, verdicts), args)


COMMANDS = {
    "analyze": cmd_analyze,
    "scan": cmd_scan,
    "density": cmd_density,
    "oracle": cmd_oracle,
    "report": cmd_report,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_app_logging(force=True)
    try:
        study = load_study(args.study)
        return COMMANDS[args.command](study, args)
    except RedlabError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return e.exit_code
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO
    except Exception:
        logger.exception("Unexpected error in %s", args.command)
        return 1


if __name__ == "__main__":
    sys.exit(main())
