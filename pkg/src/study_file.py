"""
Study files: sectioned `key = value` text describing points, primes, targets,
optional torsion match lists and scan settings.

    [points]        curve E = [0,0,1,-7,6]
                    let P1 = E(1, 0)
                    point R1 = P1, E(2,0)        (or torus coordinates: 2, -3/5)
    [presentation]  generators = P1, P2
                    torsion = T : 5
                    express Q = 2*P1 - P2 + 3*T
    [primes]        S = 2, 3
    [targets]       t1 = 2: 1, 0; 3: 0, 0
    [match]         R1 @ 2 = 1 ; -1, mu(4) ; 1   (torus)   R1 @ 2 = E(0,0), O   (curve)
    [scan]          bound, checkpoints, threads, seed, bsgs_points, exhaustive_below
"""

import logging
import re
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from src.arith import is_prime, valuation
from src.errors import PointNotOnCurveError, PresentationError, StudyParseError
from src.groups import (
    CurvePointQ,
    CurveTorsion,
    TorusTorsionClass,
    WeierstrassCurve,
    rational_add,
    rational_multiple,
    rational_point_order,
    torsion_order,
)
from src.lab import MatchList, ScanSettings, Study, curve_study, torus_study
from src.structure import Target, declared_presentation

logger = logging.getLogger(__name__)

SECTIONS = ("points", "presentation", "primes", "targets", "match", "scan")
SCAN_INT_KEYS = ("bound", "threads", "seed", "bsgs_points", "exhaustive_below")

_SECTION = re.compile(r"^\[(\w+)\]$")
_RATIONAL = re.compile(r"^[+-]?\d+(/\d+)?$")
_NAME = re.compile(r"^[A-Za-z_]\w*$")
_CALL = re.compile(r"^([A-Za-z_]\w*)\s*\((.*)\)$")
_TERM = re.compile(r"([+-])?\s*(?:(\d+)\s*\*\s*)?([A-Za-z_]\w*)")
_COMBINATION = re.compile(r"^[+-]?\s*(\d+\s*\*\s*)?[A-Za-z_]\w*(\s*[+-]\s*(\d+\s*\*\s*)?[A-Za-z_]\w*)*$")


@dataclass(frozen=True)
class Entry:
    line: int
    key: str
    value: str


def split_top(text: str, separator: str) -> List[str]:
    """Split on `separator` outside parentheses and brackets."""
    parts, depth, current = [], 0, []
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == separator and depth == 0:
            parts.append("".join(current).strip())
            current = []
        else:
            current.append(ch)
    parts.append("".join(current).strip())
    return parts


def _int(value: str, line: int, what: str) -> int:
    try:
        return int(value.strip())
    except ValueError:
        raise StudyParseError(f"{what} must be an integer, got {value.strip()!r}", line) from None


def _rational(value: str, line: int) -> Fraction:
    value = value.strip()
    if not _RATIONAL.match(value):
        raise StudyParseError(f"expected an integer or a fraction, got {value!r}", line)
    return Fraction(value)


def _prime(value: str, line: int) -> int:
    ell = _int(value, line, "l")
    if not is_prime(ell):
        raise StudyParseError(f"{ell} is not prime", line)
    return ell


def read_sections(text: str) -> Dict[str, List[Entry]]:
    sections: Dict[str, List[Entry]] = defaultdict(list)
    current: Optional[str] = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _SECTION.match(line)
        if header:
            current = header.group(1).lower()
            if current not in SECTIONS:
                raise StudyParseError(f"unknown section [{current}]", number)
            continue
        if current is None:
            raise StudyParseError("entry outside of any section", number)
        if "=" not in line:
            raise StudyParseError(f"expected 'key = value', got {line!r}", number)
        key, value = line.split("=", 1)
        sections[current].append(Entry(number, key.strip(), value.strip()))
    return sections


class _StudyBuilder:
    def __init__(self, name: str):
        self.name = name
        self.curve: Optional[WeierstrassCurve] = None
        self.curve_name: Optional[str] = None
        self.named: Dict[str, CurvePointQ] = {}
        self.torus_points: List[Tuple[str, Tuple[Fraction, ...]]] = []
        self.curve_points: List[Tuple[str, Tuple[CurvePointQ, ...]]] = []
        self.point_lines: Dict[str, int] = {}

    ##########################################################################
    # [points]
    ##########################################################################

    def curve_point(self, text: str, line: int) -> CurvePointQ:
        text = text.strip()
        if text == "O":
            return CurvePointQ.infinity()
        if text in self.named:
            return self.named[text]
        call = _CALL.match(text)
        if call is None:
            raise StudyParseError(f"unknown curve point {text!r}", line)
        if self.curve is None or call.group(1) != self.curve_name:
            raise StudyParseError(f"{call.group(1)} is not the study curve", line)
        coordinates = split_top(call.group(2), ",")
        if len(coordinates) != 2:
            raise StudyParseError(f"a curve point needs two coordinates, got {text!r}", line)
        try:
            return CurvePointQ.on(self.curve, _rational(coordinates[0], line), _rational(coordinates[1], line))
        except PointNotOnCurveError as e:
            raise PointNotOnCurveError(f"line {line}: {e}") from None

    def points(self, entries: Sequence[Entry]):
        for entry in entries:
            words = entry.key.split()
            if len(words) != 2 or not _NAME.match(words[1]):
                raise StudyParseError(f"unknown key {entry.key!r} in [points]", entry.line)
            kind, name = words
            if kind == "curve":
                self._curve(name, entry)
            elif kind == "let":
                if name in self.named:
                    raise StudyParseError(f"point {name} defined twice", entry.line)
                self.named[name] = self.curve_point(entry.value, entry.line)
            elif kind == "point":
                self._point(name, entry)
            else:
                raise StudyParseError(f"unknown key {entry.key!r} in [points]", entry.line)
        if not self.point_lines:
            raise StudyParseError("no study points in [points]")

    def _curve(self, name: str, entry: Entry):
        if self.curve is not None:
            raise StudyParseError("a study has at most one curve", entry.line)
        body = entry.value.strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise StudyParseError("curve coefficients must be written [a1,a2,a3,a4,a6]", entry.line)
        values = [_int(v, entry.line, "curve coefficient") for v in body[1:-1].split(",")]
        if len(values) != 5:
            raise StudyParseError(f"a curve needs 5 coefficients, got {len(values)}", entry.line)
        self.curve = WeierstrassCurve(*values)
        self.curve_name = name
        logger.debug("Curve %s = %s, discriminant %d", name, self.curve, self.curve.discriminant)

    def _point(self, name: str, entry: Entry):
        if name in self.point_lines:
            raise StudyParseError(f"point {name} defined twice", entry.line)
        self.point_lines[name] = entry.line
        items = split_top(entry.value, ",")
        if self.curve is None:
            if not all(_RATIONAL.match(item) for item in items):
                raise StudyParseError(f"torus coordinates must be rationals (declare the curve first): {entry.value!r}",
                                      entry.line)
            self.torus_points.append((name, tuple(Fraction(item) for item in items)))
        else:
            if all(_RATIONAL.match(item) for item in items):
                raise StudyParseError("mixed torus and curve points in one study", entry.line)
            self.curve_points.append((name, tuple(self.curve_point(item, entry.line) for item in items)))
        if self.torus_points and self.curve_points:
            raise StudyParseError("mixed torus and curve points in one study", entry.line)

    @property
    def point_names(self) -> List[str]:
        return [name for name, _ in (self.torus_points or self.curve_points)]

    def point_index(self, name: str, line: int) -> int:
        try:
            return self.point_names.index(name)
        except ValueError:
            raise StudyParseError(f"unknown study point {name}", line) from None

    ##########################################################################
    # [presentation]
    ##########################################################################

    def presentation(self, entries: Sequence[Entry]):
        if not entries:
            return None, ()
        if self.curve is None:
            raise StudyParseError("[presentation] applies to curve studies only", entries[0].line)

        generators: List[str] = []
        torsion: Optional[Tuple[str, int]] = None
        expressions: Dict[str, Dict[str, int]] = {}
        for entry in entries:
            words = entry.key.split()
            if words == ["generators"]:
                generators = [g.strip() for g in entry.value.split(",")]
                for g in generators:
                    if g not in self.named:
                        raise StudyParseError(f"generator {g} is not a named point", entry.line)
                    if rational_point_order(self.curve, self.named[g]) is not None:
                        raise PresentationError(f"line {entry.line}: generator {g} is a torsion point")
            elif words == ["torsion"]:
                if ":" not in entry.value:
                    raise StudyParseError("torsion must be written 'NAME : order'", entry.line)
                point, order = (s.strip() for s in entry.value.split(":", 1))
                if point not in self.named:
                    raise StudyParseError(f"torsion point {point} is not a named point", entry.line)
                n = _int(order, entry.line, "torsion order")
                actual = rational_point_order(self.curve, self.named[point])
                if actual != n:
                    raise PresentationError(f"line {entry.line}: {point} has order {actual}, not {n}")
                torsion = (point, n)
            elif len(words) == 2 and words[0] == "express":
                if words[1] not in self.named:
                    raise StudyParseError(f"{words[1]} is not a named point", entry.line)
                expressions[words[1]] = self._combination(entry)
            else:
                raise StudyParseError(f"unknown key {entry.key!r} in [presentation]", entry.line)

        basis = generators + ([torsion[0]] if torsion else [])
        for entry in entries:
            words = entry.key.split()
            if len(words) == 2 and words[0] == "express":
                self._check_expression(words[1], expressions[words[1]], basis, entry.line)

        n_t = torsion[1] if torsion else 1
        C, offsets, blocks = [], [], []
        for name, coordinates in self.curve_points:
            blocks.append(len(coordinates))
            for P in coordinates:
                row, offset = self._express(P, generators, torsion, expressions, self.point_lines[name])
                C.append(row)
                offsets.append(offset)
        presented = declared_presentation(C, offsets, n_t, blocks, basis)
        return presented, ((n_t,) if torsion else ())

    def _combination(self, entry: Entry) -> Dict[str, int]:
        text = entry.value.strip()
        if not _COMBINATION.match(text):
            raise StudyParseError(f"cannot read the combination {text!r}", entry.line)
        out: Dict[str, int] = defaultdict(int)
        for sign, coefficient, name in _TERM.findall(text):
            value = int(coefficient) if coefficient else 1
            out[name] += -value if sign == "-" else value
        return dict(out)

    def _check_expression(self, name: str, terms: Dict[str, int], basis: Sequence[str], line: int):
        total = CurvePointQ.infinity()
        for term, coefficient in terms.items():
            if term not in basis:
                raise StudyParseError(f"{term} is neither a generator nor the torsion point", line)
            total = rational_add(self.curve, total, rational_multiple(self.curve, coefficient, self.named[term]))
        if total != self.named[name]:
            raise PresentationError(f"line {line}: {name} is not the stated combination")

    def _express(self, P: CurvePointQ, generators, torsion, expressions, line: int) -> Tuple[List[int], int]:
        row = [0] * len(generators)
        if P.is_infinity:
            return row, 0
        for g_index, g in enumerate(generators):
            if self.named[g] == P:
                row[g_index] = 1
                return row, 0
        if torsion and self.named[torsion[0]] == P:
            return row, 1
        for name, terms in expressions.items():
            if self.named[name] == P:
                for term, coefficient in terms.items():
                    if torsion and term == torsion[0]:
                        continue
                    row[generators.index(term)] += coefficient
                offset = terms.get(torsion[0], 0) if torsion else 0
                return row, offset
        raise StudyParseError(f"{P} is not expressed in the declared presentation", line)

    ##########################################################################
    # [primes], [targets], [match], [scan]
    ##########################################################################

    def primes(self, entries: Sequence[Entry]) -> Tuple[int, ...]:
        S: Tuple[int, ...] = ()
        for entry in entries:
            if entry.key != "S":
                raise StudyParseError(f"unknown key {entry.key!r} in [primes]", entry.line)
            S = tuple(sorted({_prime(v, entry.line) for v in entry.value.split(",")}))
        if not S:
            raise StudyParseError("missing [primes] S = ...")
        return S

    def targets(self, entries: Sequence[Entry], S: Sequence[int]) -> Tuple[Target, ...]:
        out, seen = [], set()
        width = len(self.point_names)
        for entry in entries:
            if not _NAME.match(entry.key) or entry.key in seen:
                raise StudyParseError(f"bad or repeated target name {entry.key!r}", entry.line)
            seen.add(entry.key)
            valuations: Dict[int, List[int]] = {}
            for part in entry.value.split(";"):
                if ":" not in part:
                    raise StudyParseError(f"expected 'l: a1, a2, ...', got {part.strip()!r}", entry.line)
                ell_text, values = part.split(":", 1)
                ell = _prime(ell_text, entry.line)
                if ell not in S:
                    raise StudyParseError(f"target {entry.key} uses l={ell} outside S", entry.line)
                a = [_int(v, entry.line, "valuation") for v in values.split(",")]
                if len(a) != width:
                    raise StudyParseError(f"target {entry.key} gives {len(a)} valuations at l={ell}, "
                                          f"the study has {width} points", entry.line)
                if any(x < 0 for x in a):
                    raise StudyParseError("valuations must be nonnegative", entry.line)
                valuations[ell] = a
            out.append(Target.of(entry.key, valuations))
        return tuple(out)

    def matches(self, entries: Sequence[Entry], S: Sequence[int]) -> Tuple[MatchList, ...]:
        out = []
        for entry in entries:
            if "@" not in entry.key:
                raise StudyParseError(f"expected 'POINT @ l', got {entry.key!r}", entry.line)
            point_name, ell_text = (s.strip() for s in entry.key.split("@", 1))
            index = self.point_index(point_name, entry.line)
            ell = _prime(ell_text, entry.line)
            if ell not in S:
                raise StudyParseError(f"match list uses l={ell} outside S", entry.line)
            items = [self._torsion_item(item, index, ell, entry.line) for item in split_top(entry.value, ",")]
            out.append(MatchList(index, ell, tuple(items)))
        return tuple(out)

    def _torsion_item(self, text: str, index: int, ell: int, line: int):
        coordinates = [c.strip() for c in split_top(text, ";")]
        if self.curve is None:
            rank = len(self.torus_points[index][1])
            orders = []
            for c in coordinates:
                if c == "1":
                    orders.append(1)
                elif c == "-1":
                    orders.append(2)
                else:
                    call = _CALL.match(c)
                    if call is None or call.group(1) != "mu":
                        raise StudyParseError(f"expected 1, -1 or mu(n), got {c!r}", line)
                    orders.append(_int(call.group(2), line, "root of unity order"))
            if len(orders) != rank:
                raise StudyParseError(f"torsion item {text!r} needs {rank} coordinates", line)
            for n in orders:
                if n < 1 or ell ** valuation(n, ell) != n:
                    raise StudyParseError(f"order {n} is not a power of {ell}", line)
            return TorusTorsionClass(tuple(orders))

        rank = len(self.curve_points[index][1])
        points = tuple(self.curve_point(c, line) for c in coordinates)
        if len(points) != rank:
            raise StudyParseError(f"torsion item {text!r} needs {rank} coordinates", line)
        order = torsion_order(self.curve, points)
        if ell ** valuation(order, ell) != order:
            raise StudyParseError(f"torsion item {text!r} has order {order}, not a power of {ell}", line)
        return CurveTorsion(points, order)

    def scan(self, entries: Sequence[Entry]) -> ScanSettings:
        values = {}
        for entry in entries:
            if entry.key in SCAN_INT_KEYS:
                values[entry.key] = _int(entry.value, entry.line, entry.key)
            elif entry.key == "checkpoints":
                values["checkpoints"] = tuple(sorted(_int(v, entry.line, "checkpoint")
                                                     for v in entry.value.split(",")))
            else:
                raise StudyParseError(f"unknown key {entry.key!r} in [scan]", entry.line)
        return ScanSettings(**values)


def parse_study(text: str, name: str = "study") -> Study:
    """Parse and validate a study file; every error names its line when it has one."""
    sections = read_sections(text)
    builder = _StudyBuilder(name)
    builder.points(sections["points"])
    presented, torsion_orders = builder.presentation(sections["presentation"])
    S = builder.primes(sections["primes"])
    targets = builder.targets(sections["targets"], S)
    matches = builder.matches(sections["match"], S)
    scan = builder.scan(sections["scan"])

    if builder.curve is None:
        return torus_study(name, [coordinates for _, coordinates in builder.torus_points], S,
                           targets, matches, scan)
    return curve_study(name, builder.curve, [coordinates for _, coordinates in builder.curve_points], S,
                       targets, matches, presented, torsion_orders, scan)


def load_study(path: Union[str, Path]) -> Study:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as e:
        raise StudyParseError(f"{path} is not UTF-8: {e}") from None
    study = parse_study(text, name=path.stem)
    logger.info("Loaded study %s: %d point(s), S = %s, %d target(s)",
                study.name, len(study.points), list(study.primes), len(study.targets))
    return study
