"""
Reports juxtapose, per target, the criterion verdict, empirical densities at
each checkpoint and the exact density predicted by the Kummer model when one
applies. JSON is the primary form; the CSV is generated from it.
"""

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from src.errors import KummerError, NoStabilizationError
from src.kummer import exact_density_of_power
from src.lab import DensityEstimate, ScanRecord, Study, StudyKind, convergence_series, tally_lpart
from src.structure import CriterionVerdict, Target

logger = logging.getLogger(__name__)

AGREEMENT_WIDTHS = 4.0
DENSITY_NOTE = ("Densities are counted over pi(X), excluded primes included. "
                "Zero matches up to X is bounded evidence, not a proof that a set is finite.")
CSV_COLUMNS = ["target", "valuations", "verdict", "declared", "witness", "bound", "matches",
               "included_primes", "excluded_primes", "estimate", "half_width", "oracle", "oracle_decimal",
               "agreement"]


@dataclass
class TargetReport:
    name: str
    valuations: str
    verdict: Optional[str] = None
    declared: bool = False
    witness: Dict[str, str] = field(default_factory=dict)
    estimates: List[DensityEstimate] = field(default_factory=list)
    oracle: Optional[Fraction] = None

    @property
    def final(self) -> Optional[DensityEstimate]:
        return self.estimates[-1] if self.estimates else None

    @property
    def agreement(self) -> Optional[bool]:
        if self.oracle is None or self.final is None:
            return None
        return self.final.agrees_with(float(self.oracle), AGREEMENT_WIDTHS)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "valuations": self.valuations,
            "verdict": self.verdict,
            "declared": self.declared,
            "witness": self.witness,
            "estimates": [e.as_dict() for e in self.estimates],
            "oracle": None if self.oracle is None else str(self.oracle),
            "oracle_decimal": None if self.oracle is None else float(self.oracle),
            "agreement": self.agreement,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TargetReport":
        estimates = [DensityEstimate(e["matches"], e["included_primes"], e["excluded_primes"], e["bound"])
                     for e in data.get("estimates", [])]
        oracle = data.get("oracle")
        return cls(data["name"], data["valuations"], data.get("verdict"), bool(data.get("declared")),
                   dict(data.get("witness") or {}), estimates, None if oracle is None else Fraction(oracle))


@dataclass
class Report:
    study: str
    primes: List[int]
    bound: Optional[int] = None
    exclusions: Dict[str, int] = field(default_factory=dict)
    targets: List[TargetReport] = field(default_factory=list)
    lparts: List[dict] = field(default_factory=list)
    note: str = DENSITY_NOTE

    @property
    def agreement_failures(self) -> List[str]:
        return [t.name for t in self.targets if t.agreement is False]

    def target(self, name: str) -> TargetReport:
        for t in self.targets:
            if t.name == name:
                return t
        raise KeyError(name)

    def to_json(self) -> str:
        data = {
            "study": self.study,
            "primes": self.primes,
            "bound": self.bound,
            "exclusions": self.exclusions,
            "note": self.note,
            "targets": [t.to_dict() for t in self.targets],
            "lparts": self.lparts,
        }
        return json.dumps(data, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Report":
        data = json.loads(text)
        return cls(data["study"], list(data["primes"]), data.get("bound"), dict(data.get("exclusions") or {}),
                   [TargetReport.from_dict(t) for t in data.get("targets", [])],
                   list(data.get("lparts") or []), data.get("note", DENSITY_NOTE))

    def csv_rows(self) -> List[dict]:
        rows = []
        for t in self.targets:
            base = {
                "target": t.name,
                "valuations": t.valuations,
                "verdict": t.verdict or "",
                "declared": "yes" if t.declared else "no",
                "witness": " | ".join(f"l={ell}: {w}" for ell, w in sorted(t.witness.items())),
                "oracle": "" if t.oracle is None else str(t.oracle),
                "oracle_decimal": "" if t.oracle is None else f"{float(t.oracle):.6f}",
            }
            estimates = t.estimates or [None]
            for e in estimates:
                row = dict(base)
                row.update({
                    "bound": "" if e is None else e.bound,
                    "matches": "" if e is None else e.matches,
                    "included_primes": "" if e is None else e.included_primes,
                    "excluded_primes": "" if e is None else e.excluded_primes,
                    "estimate": "" if e is None else f"{e.estimate:.6f}",
                    "half_width": "" if e is None else f"{e.half_width:.6f}",
                    "agreement": "",
                })
                if e is t.final and t.agreement is not None:
                    row["agreement"] = "ok" if t.agreement else "FAIL"
                rows.append(row)
        return rows

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows())
        return buffer.getvalue()

    def write(self, out_dir: Union[str, Path]) -> List[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path = out / f"{self.study}-report.json"
        csv_path = out / f"{self.study}-report.csv"
        json_path.write_text(self.to_json(), encoding="utf-8")
        csv_path.write_text(self.to_csv(), encoding="utf-8")
        logger.info("Report written to %s and %s", json_path, csv_path)
        return [json_path, csv_path]


def oracle_density(study: Study, target: Target) -> Optional[Fraction]:
    """Exact density from the Kummer model: one torus coordinate and one l only."""
    if study.kind != StudyKind.TORUS or len(study.points) != 1 or len(target.primes) != 1:
        return None
    point = study.points[0].torus
    if point.rank != 1:
        return None
    ell = target.primes[0]
    try:
        return exact_density_of_power(point.coordinates[0], ell, target.at(ell)[0])
    except NoStabilizationError:
        raise
    except KummerError as e:
        logger.warning("No oracle for target %s: %s", target.name, e)
        return None


def exclusion_counts(records: Sequence[ScanRecord]) -> Dict[str, int]:
    counts = Counter(r.reason.value for r in records if not r.included)
    return dict(sorted(counts.items()))


def build_report(study: Study, verdicts: Optional[Dict[str, CriterionVerdict]] = None,
                 records: Optional[Sequence[ScanRecord]] = None, bound: Optional[int] = None,
                 checkpoints: Sequence[int] = (), with_oracle: bool = False) -> Report:
    """Every target of the study appears exactly once, with whichever parts were computed."""
    report = Report(study.name, list(study.primes), bound)
    points = sorted(set(checkpoints) | ({bound} if bound else set()))
    if records:
        report.exclusions = exclusion_counts(records)
    for target in study.targets:
        entry = TargetReport(target.name, str(target))
        if verdicts and target.name in verdicts:
            verdict = verdicts[target.name]
            entry.verdict = verdict.verdict.value
            entry.declared = verdict.conditional
            if verdict.witness:
                entry.witness = {str(ell): w.describe() for ell, w in verdict.witness.items()}
        if records:
            entry.estimates = convergence_series(records, target, points, bound)
        if with_oracle:
            entry.oracle = oracle_density(study, target)
        report.targets.append(entry)
    if records:
        for match in study.matches:
            for index in list(range(len(match.torsion))) + [None]:
                estimate = tally_lpart(records, match.ell, match.point, index, bound)
                report.lparts.append({
                    "point": study.points[match.point].name,
                    "ell": match.ell,
                    "torsion": "none" if index is None else str(match.torsion[index]),
                    "estimate": estimate.as_dict(),
                })
    return report
