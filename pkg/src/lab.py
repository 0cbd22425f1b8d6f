"""
The experiment engine: studies, per-prime scans, and density estimates.

A scan walks the primes up to a bound, applies the bad-prime policy and
records, for every prime l in S and every study point R_i, the l-adic
valuation of the order of (R_i mod p). Targets are tallied from the records
afterwards, so one scan serves every target of the study.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from src.arith import PrimeContext, factorize, order_valuation, segment_primes, valuation
from src.errors import (
    ConfigurationError,
    ExclusionError,
    ExclusionReason,
    FactorizationBudgetError,
)
from src.groups import (
    DEFAULT_BSGS_POINTS,
    DEFAULT_EXHAUSTIVE_BELOW,
    CurvePointQ,
    LPart,
    TorsionDescriptor,
    TorusPoint,
    WeierstrassCurve,
    check_torsion_list,
    curve_group_order,
    curve_reduce,
    l_primary_part,
    match_l_part,
    rational_point_order,
    reduce_torus_point,
    tuple_order,
)
from src.structure import PresentedSubgroup, Target, declared_presentation, torus_presentation

logger = logging.getLogger(__name__)

Z_95 = 1.96


##############################################################################
# Studies
##############################################################################

class StudyKind(str, Enum):
    TORUS = "torus"
    CURVE = "curve"


@dataclass(frozen=True)
class StudyPoint:
    name: str
    torus: Optional[TorusPoint] = None
    curve_points: Tuple[CurvePointQ, ...] = ()
    labels: Tuple[str, ...] = ()

    @property
    def rank(self) -> int:
        return self.torus.rank if self.torus is not None else len(self.curve_points)


@dataclass(frozen=True)
class MatchList:
    """Listed torsion points to compare with the l-part of R_point."""
    point: int
    ell: int
    torsion: Tuple[TorsionDescriptor, ...]


@dataclass(frozen=True)
class ScanSettings:
    bound: Optional[int] = None
    checkpoints: Tuple[int, ...] = ()
    threads: Optional[int] = None
    seed: int = 0
    bsgs_points: int = DEFAULT_BSGS_POINTS
    exhaustive_below: int = DEFAULT_EXHAUSTIVE_BELOW


@dataclass(frozen=True)
class ColumnLayout:
    valuation_columns: Tuple[Tuple[int, int], ...]
    label_columns: Tuple[Tuple[int, int], ...] = ()

    def valuation_index(self, ell: int, point: int) -> int:
        try:
            return self.valuation_columns.index((ell, point))
        except ValueError:
            raise ConfigurationError(f"no valuation column for l={ell}, point {point}") from None

    def label_index(self, ell: int, point: int) -> int:
        try:
            return self.label_columns.index((ell, point))
        except ValueError:
            raise ConfigurationError(f"no l-part match list for l={ell}, point {point}") from None


@dataclass(frozen=True)
class Study:
    name: str
    kind: StudyKind
    points: Tuple[StudyPoint, ...]
    primes: Tuple[int, ...]
    presentation: PresentedSubgroup = field(compare=False)
    targets: Tuple[Target, ...] = ()
    curve: Optional[WeierstrassCurve] = None
    matches: Tuple[MatchList, ...] = ()
    torsion_orders: Tuple[int, ...] = ()
    scan: ScanSettings = ScanSettings()

    def __post_init__(self):
        if not self.points:
            raise ConfigurationError("a study needs at least one point")
        if not self.primes:
            raise ConfigurationError("the prime set S is empty")
        if (self.kind == StudyKind.CURVE) != (self.curve is not None):
            raise ConfigurationError("curve studies need exactly one curve, torus studies none")
        for target in self.targets:
            for ell in target.primes:
                if ell not in self.primes:
                    raise ConfigurationError(f"target {target.name} uses l={ell} outside S")
                if len(target.at(ell)) != len(self.points):
                    raise ConfigurationError(f"target {target.name} needs {len(self.points)} valuations at l={ell}")
        for match in self.matches:
            if not 0 <= match.point < len(self.points) or match.ell not in self.primes:
                raise ConfigurationError(f"match list refers to point {match.point} at l={match.ell}")
            check_torsion_list(match.torsion)

    @property
    def layout(self) -> ColumnLayout:
        columns = tuple((ell, i) for ell in self.primes for i in range(len(self.points)))
        return ColumnLayout(columns, tuple((m.ell, m.point) for m in self.matches))

    def target(self, name: str) -> Target:
        for target in self.targets:
            if target.name == name:
                return target
        raise ConfigurationError(f"unknown target {name}")

    def fingerprint(self) -> dict:
        """Everything a scan depends on, in JSON-ready form."""
        def point_json(point: StudyPoint):
            if point.torus is not None:
                return [str(c) for c in point.torus.coordinates]
            return [str(P) for P in point.curve_points]

        def torsion_json(item):
            if hasattr(item, "orders"):
                return list(item.orders)
            return [str(P) for P in item.points]

        return {
            "kind": self.kind.value,
            "curve": list(self.curve.coefficients) if self.curve else None,
            "points": [point_json(p) for p in self.points],
            "primes": list(self.primes),
            "matches": [[m.point, m.ell, [torsion_json(t) for t in m.torsion]] for m in self.matches],
            "torsion_orders": list(self.torsion_orders),
        }


def torus_study(name: str, points: Sequence[Sequence], primes: Sequence[int],
                targets: Sequence[Target] = (), matches: Sequence[MatchList] = (),
                scan: ScanSettings = ScanSettings()) -> Study:
    """Build a torus study from coordinates given as ints, strings or Fractions."""
    from src.groups import FactoredRational
    study_points = []
    for index, coordinates in enumerate(points):
        if isinstance(coordinates, TorusPoint):
            R = coordinates
        else:
            R = TorusPoint(tuple(FactoredRational.from_fraction(c) for c in coordinates))
        study_points.append(StudyPoint(f"R{index + 1}", torus=R))
    presented = torus_presentation([p.torus for p in study_points])
    # -1 is in play as soon as a coordinate is negative
    orders = {2} if any(c.sign < 0 for p in study_points for c in p.torus.coordinates) else set()
    for match in matches:
        orders.update(t.order for t in match.torsion)
    orders.discard(1)
    return Study(name, StudyKind.TORUS, tuple(study_points), tuple(primes), presented,
                 tuple(targets), None, tuple(matches), tuple(sorted(orders)), scan)


def default_curve_presentation(curve: WeierstrassCurve, points: Sequence[Sequence[CurvePointQ]]) -> Tuple[PresentedSubgroup, Tuple[int, ...]]:
    """
    Without a [presentation] section: every distinct point of infinite order is
    declared an independent generator, and at most one distinct torsion point
    may appear (the torsion generator).
    """
    generators: List[CurvePointQ] = []
    torsion: Optional[CurvePointQ] = None
    torsion_order = 1
    for P in (P for coordinates in points for P in coordinates):
        if P.is_infinity or P in generators or P == torsion:
            continue
        order = rational_point_order(curve, P)
        if order is None:
            generators.append(P)
        elif torsion is None:
            torsion, torsion_order = P, order
        else:
            raise ConfigurationError("several torsion points: declare the relations in [presentation]")

    C, offsets, blocks = [], [], []
    for coordinates in points:
        blocks.append(len(coordinates))
        for P in coordinates:
            C.append([1 if P == G else 0 for G in generators])
            offsets.append(1 if torsion is not None and P == torsion else 0)
    labels = [str(G) for G in generators] + ([str(torsion)] if torsion else [])
    presented = declared_presentation(C, offsets, torsion_order, blocks, labels)
    return presented, ((torsion_order,) if torsion is not None else ())


def curve_study(name: str, curve: WeierstrassCurve, points: Sequence[Sequence[CurvePointQ]],
                primes: Sequence[int], targets: Sequence[Target] = (),
                matches: Sequence[MatchList] = (), presentation: Optional[PresentedSubgroup] = None,
                torsion_orders: Sequence[int] = (), scan: ScanSettings = ScanSettings()) -> Study:
    study_points = tuple(StudyPoint(f"R{i + 1}", curve_points=tuple(c)) for i, c in enumerate(points))
    if presentation is None:
        presentation, torsion_orders = default_curve_presentation(curve, points)
    orders = set(torsion_orders)
    for match in matches:
        orders.update(t.order for t in match.torsion)
    return Study(name, StudyKind.CURVE, study_points, tuple(primes), presentation, tuple(targets),
                 curve, tuple(matches), tuple(sorted(orders)), scan)


##############################################################################
# Scan records
##############################################################################

@dataclass(frozen=True)
class ScanRecord:
    p: int
    reason: Optional[ExclusionReason]
    valuations: Tuple[int, ...]
    labels: Tuple[Optional[int], ...]
    layout: ColumnLayout = field(compare=False, repr=False)

    @property
    def included(self) -> bool:
        return self.reason is None

    def valuation(self, ell: int, point: int) -> int:
        return self.valuations[self.layout.valuation_index(ell, point)]

    def label(self, ell: int, point: int) -> Optional[int]:
        return self.labels[self.layout.label_index(ell, point)]


def _excluded(p: int, reason: ExclusionReason, layout: ColumnLayout) -> ScanRecord:
    return ScanRecord(p, reason, (), (), layout)


def _check_torsion_orders(study: Study, p: int):
    for order in study.torsion_orders:
        if order % p == 0:
            raise ExclusionError(ExclusionReason.TORSION_ORDER, f"{p} divides torsion order {order}")


def _scan_torus_prime(study: Study, ctx: PrimeContext, layout: ColumnLayout) -> ScanRecord:
    reduced = [reduce_torus_point(point.torus, ctx) for point in study.points]
    _check_torsion_orders(study, ctx.p)
    valuations = tuple(max(order_valuation(x, ctx, ell) for x in reduced[i].residues)
                       for ell, i in layout.valuation_columns)
    labels = []
    for match in study.matches:
        g = reduced[match.point]
        order = tuple_order(g, ctx.p - 1, ctx.p_minus_1)
        labels.append(match_l_part(l_primary_part(g, order, match.ell), match.torsion))
    return ScanRecord(ctx.p, None, valuations, tuple(labels), layout)


def _scan_curve_prime(study: Study, ctx: PrimeContext, layout: ColumnLayout, seed: int) -> ScanRecord:
    curve = study.curve
    p = ctx.p
    reduced = [curve_reduce(curve, point.curve_points, ctx) for point in study.points]
    _check_torsion_orders(study, p)
    N = curve_group_order(curve, ctx, seed, study.scan.bsgs_points, study.scan.exhaustive_below)
    _, N_factors = factorize(N)
    orders = [tuple_order(g, N, N_factors) for g in reduced]
    valuations = tuple(valuation(orders[i], ell) for ell, i in layout.valuation_columns)
    labels = []
    for match in study.matches:
        part: LPart = l_primary_part(reduced[match.point], orders[match.point], match.ell)
        labels.append(match_l_part(part, match.torsion))
    return ScanRecord(p, None, valuations, tuple(labels), layout)


def scan_prime(study: Study, p: int, seed: int = 0, layout: Optional[ColumnLayout] = None) -> ScanRecord:
    """One prime under the bad-prime policy; exclusions become records, never exceptions."""
    layout = layout or study.layout
    if p in study.primes:
        return _excluded(p, ExclusionReason.STUDIED_PRIME, layout)
    ctx = PrimeContext(p)
    try:
        if study.kind == StudyKind.TORUS:
            return _scan_torus_prime(study, ctx, layout)
        return _scan_curve_prime(study, ctx, layout, seed)
    except ExclusionError as e:
        logger.debug("p=%d excluded: %s", p, e)
        return _excluded(p, e.reason, layout)
    except FactorizationBudgetError as e:
        logger.warning("p=%d excluded for budget: %s", p, e)
        return _excluded(p, ExclusionReason.BUDGET, layout)


def scan_range(study: Study, lo: int, hi: int, seed: int = 0) -> List[ScanRecord]:
    """Records for the primes in [lo, hi), ascending."""
    layout = study.layout
    return [scan_prime(study, int(p), seed, layout) for p in segment_primes(lo, hi)]


def run_scan(study: Study, bound: int, threads: Optional[int] = None, seed: Optional[int] = None,
             progress_callback: Optional[Callable[[dict], None]] = None) -> List[ScanRecord]:
    """One record per prime <= bound, in prime order, independent of the worker count."""
    from src.scan_manager import ScanManager

    if bound < 2:
        return []
    threads = threads or study.scan.threads or 1
    seed = study.scan.seed if seed is None else seed
    manager = ScanManager(threads)
    try:
        return manager.run(study, bound, seed, progress_callback)
    finally:
        manager.shutdown()


##############################################################################
# Estimates
##############################################################################

def wilson_interval(h: int, n: int, z: float = Z_95) -> Tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    p = h / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def wilson_half_width(h: int, n: int, z: float = Z_95) -> float:
    if n == 0:
        return 0.5
    p = h / n
    return z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)


@dataclass(frozen=True)
class DensityEstimate:
    matches: int
    included_primes: int
    excluded_primes: int
    bound: int

    @property
    def prime_count(self) -> int:
        return self.included_primes + self.excluded_primes

    @property
    def estimate(self) -> float:
        return self.matches / self.prime_count if self.prime_count else 0.0

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.matches, self.prime_count) if self.prime_count else Fraction(0)

    @property
    def half_width(self) -> float:
        return wilson_half_width(self.matches, self.prime_count)

    def agrees_with(self, value: float, widths: float = 4.0) -> bool:
        return abs(self.estimate - value) <= widths * self.half_width

    def as_dict(self) -> dict:
        return {
            "bound": self.bound,
            "matches": self.matches,
            "included_primes": self.included_primes,
            "excluded_primes": self.excluded_primes,
            "prime_count": self.prime_count,
            "estimate": self.estimate,
            "half_width": self.half_width,
        }


def _truncate(records: Sequence[ScanRecord], bound: Optional[int]) -> Tuple[Sequence[ScanRecord], int]:
    if not records:
        raise ConfigurationError("no records")
    if bound is None:
        return records, records[-1].p
    return [r for r in records if r.p <= bound], bound


def _estimate(records: Sequence[ScanRecord], bound: int, predicate: Callable[[ScanRecord], bool]) -> DensityEstimate:
    included = [r for r in records if r.included]
    matches = sum(1 for r in included if predicate(r))
    return DensityEstimate(matches, len(included), len(records) - len(included), bound)


def _target_columns(records: Sequence[ScanRecord], target: Target) -> List[Tuple[int, int]]:
    layout = records[0].layout
    columns = []
    for ell in target.primes:
        for i, a in enumerate(target.at(ell)):
            columns.append((layout.valuation_index(ell, i), a))
    return columns


def tally(records: Sequence[ScanRecord], target: Target, bound: Optional[int] = None) -> DensityEstimate:
    """Primes with v_l(ord(R_i mod p)) = a_{l,i} for every (l, i), over pi(X) (exclusions counted)."""
    records, bound = _truncate(records, bound)
    if not records:
        return DensityEstimate(0, 0, 0, bound)
    columns = _target_columns(records, target)
    return _estimate(records, bound, lambda r: all(r.valuations[c] == a for c, a in columns))


def tally_lpart(records: Sequence[ScanRecord], ell: int, point: int, index: Optional[int],
                bound: Optional[int] = None) -> DensityEstimate:
    """Primes whose l-part of (R_point mod p) is the listed torsion point `index` (None: no listed point)."""
    records, bound = _truncate(records, bound)
    if not records:
        return DensityEstimate(0, 0, 0, bound)
    column = records[0].layout.label_index(ell, point)
    return _estimate(records, bound, lambda r: r.labels[column] == index)


def convergence_series(records: Sequence[ScanRecord], target: Target,
                       checkpoints: Sequence[int], bound: Optional[int] = None) -> List[DensityEstimate]:
    """Estimates at each checkpoint; `bound` is the scan bound X (default: the last scanned prime)."""
    if not records:
        raise ConfigurationError("no records")
    if list(checkpoints) != sorted(checkpoints):
        raise ConfigurationError("checkpoints must be ascending")
    limit = records[-1].p if bound is None else bound
    if checkpoints and checkpoints[-1] > limit:
        raise ConfigurationError(f"checkpoint {checkpoints[-1]} lies beyond the scan bound {limit}")
    columns = _target_columns(records, target)
    series = []
    matches = included = excluded = 0
    position = 0
    for checkpoint in checkpoints:
        while position < len(records) and records[position].p <= checkpoint:
            r = records[position]
            if r.included:
                included += 1
                if all(r.valuations[c] == a for c, a in columns):
                    matches += 1
            else:
                excluded += 1
            position += 1
        series.append(DensityEstimate(matches, included, excluded, checkpoint))
    return series


def valuation_histogram(records: Sequence[ScanRecord], ell: int, point: int) -> Dict[int, int]:
    if not records:
        return {}
    column = records[0].layout.valuation_index(ell, point)
    return dict(sorted(Counter(r.valuations[column] for r in records if r.included).items()))


def minimum_valuation(records: Sequence[ScanRecord], ell: int, point: int) -> Optional[int]:
    """Smallest observed v_l(ord(R_i mod p)); eventually v_l(n_R) for a single point of infinite order."""
    histogram = valuation_histogram(records, ell, point)
    return min(histogram) if histogram else None
