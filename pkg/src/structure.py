"""
Smallest algebraic subgroup G_R of a point, its component group, and the
finite-vs-positive-density decision.

Both group kinds share one presentation. The k coordinates of the combined
point are integer combinations of g independent generators (the k x g
coefficient matrix C) plus offsets t of one cyclic torsion generator of
order n_t. For a torus the generators are the primes of the coordinates and
the torsion generator is -1; for an elliptic product they are declared by
the user. The relation lattice is L = {e : e^T C = 0, e.t = 0 mod n_t}.

A torsion point of G[l^A] is written as an exponent vector modulo N = l^A:
one variable per torus coordinate (x = zeta^X), two per elliptic coordinate
(coordinates in a basis of E[N]).
"""

import itertools
import logging
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from sympy import Matrix
from sympy.matrices.normalforms import hermite_normal_form

from src.arith import valuation
from src.errors import ConfigurationError, ConsistencyError, PresentationError
from src.groups import TorusPoint

logger = logging.getLogger(__name__)

IntMatrix = List[List[int]]

# deterministic pseudo-random samples before falling back to full enumeration
WITNESS_SAMPLES = 2048


##############################################################################
# Integer normal forms
##############################################################################

@dataclass(frozen=True)
class SmithForm:
    U: Tuple[Tuple[int, ...], ...]
    D: Tuple[Tuple[int, ...], ...]
    V: Tuple[Tuple[int, ...], ...]
    V_inverse: Tuple[Tuple[int, ...], ...]

    @property
    def diagonal(self) -> Tuple[int, ...]:
        return tuple(self.D[i][i] for i in range(min(len(self.D), len(self.V))))

    @property
    def rank(self) -> int:
        return sum(1 for d in self.diagonal if d != 0)


def _identity(n: int) -> IntMatrix:
    return [[int(i == j) for j in range(n)] for i in range(n)]


def _freeze(M: IntMatrix) -> Tuple[Tuple[int, ...], ...]:
    return tuple(tuple(row) for row in M)


def smith_normal_decomposition(M: Sequence[Sequence[int]], ncols: Optional[int] = None) -> SmithForm:
    """
    U * M * V = D with D diagonal, d_1 | d_2 | ..., d_i >= 0, U and V unimodular.
    V^-1 is tracked alongside V (its rows are a basis adapted to the row space of M).
    """
    A = [list(map(int, row)) for row in M]
    m = len(A)
    n = len(A[0]) if m else (ncols or 0)
    U = _identity(m)
    V = _identity(n)
    W = _identity(n)

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        for row in V:
            row[i], row[j] = row[j], row[i]
        W[i], W[j] = W[j], W[i]

    def add_row(target, source, q):
        # row_target += q * row_source
        A[target] = [a + q * b for a, b in zip(A[target], A[source])]
        U[target] = [a + q * b for a, b in zip(U[target], U[source])]

    def add_col(target, source, q):
        # col_target += q * col_source; V^-1 changes by the inverse row operation
        for row in A:
            row[target] += q * row[source]
        for row in V:
            row[target] += q * row[source]
        W[source] = [a - q * b for a, b in zip(W[source], W[target])]

    for t in range(min(m, n)):
        pivot = None
        for i in range(t, m):
            for j in range(t, n):
                if A[i][j] and (pivot is None or abs(A[i][j]) < abs(A[pivot[0]][pivot[1]])):
                    pivot = (i, j)
        if pivot is None:
            break
        swap_rows(t, pivot[0])
        swap_cols(t, pivot[1])

        while True:
            changed = False
            for i in range(t + 1, m):
                if A[i][t]:
                    add_row(i, t, -(A[i][t] // A[t][t]))
                    if A[i][t]:
                        swap_rows(t, i)
                        changed = True
            for j in range(t + 1, n):
                if A[t][j]:
                    add_col(j, t, -(A[t][j] // A[t][t]))
                    if A[t][j]:
                        swap_cols(t, j)
                        changed = True
            if changed:
                continue
            # clean pivot: enforce divisibility on the remaining block
            offender = next(((i, j) for i in range(t + 1, m) for j in range(t + 1, n)
                             if A[i][j] % A[t][t]), None)
            if offender is None:
                break
            add_row(t, offender[0], 1)

        if A[t][t] < 0:
            A[t] = [-a for a in A[t]]
            U[t] = [-a for a in U[t]]

    return SmithForm(_freeze(U), _freeze(A), _freeze(V), _freeze(W))


def smith_normal_form(M: Sequence[Sequence[int]], ncols: Optional[int] = None):
    """(U, D, V) with U * M * V = D."""
    snf = smith_normal_decomposition(M, ncols)
    return snf.U, snf.D, snf.V


def integer_kernel(M: Sequence[Sequence[int]], ncols: int) -> List[List[int]]:
    """Basis of {x in Z^ncols : M x = 0}: the columns of V past the rank."""
    snf = smith_normal_decomposition(M, ncols)
    return [[snf.V[i][j] for i in range(ncols)] for j in range(snf.rank, ncols)]


def _leading_positive(row: Sequence[int]) -> List[int]:
    for a in row:
        if a:
            return [-b for b in row] if a < 0 else list(row)
    return list(row)


def hermite_rows(basis: Sequence[Sequence[int]]) -> Tuple[Tuple[int, ...], ...]:
    """Canonical basis of the row lattice: HNF of the transpose, leading entries positive."""
    if not basis:
        return ()
    H = hermite_normal_form(Matrix(basis).T)
    rows = []
    for j in range(H.shape[1]):
        row = [int(H[i, j]) for i in range(H.shape[0])]
        if any(row):
            rows.append(tuple(_leading_positive(row)))
    return tuple(rows)


##############################################################################
# Presentations
##############################################################################

@dataclass(frozen=True)
class RelationLattice:
    ambient_rank: int
    basis: Tuple[Tuple[int, ...], ...]

    @property
    def rank(self) -> int:
        return len(self.basis)


def relation_lattice(coefficients: Sequence[Sequence[int]], offsets: Sequence[int],
                     torsion_order: int) -> RelationLattice:
    """L = {e : e^T C = 0, e.t = 0 mod n_t}, as the projected kernel of [[C^T, 0], [t^T, n_t]]."""
    k = len(offsets)
    g = len(coefficients[0]) if coefficients and coefficients[0] else 0
    system = [[coefficients[c][i] for c in range(k)] + [0] for i in range(g)]
    system.append([int(o) for o in offsets] + [torsion_order])
    kernel = integer_kernel(system, k + 1)
    return RelationLattice(k, hermite_rows([vector[:k] for vector in kernel]))


def _torus_matrix(R: TorusPoint) -> Tuple[IntMatrix, List[int], Tuple[int, ...]]:
    primes = tuple(sorted({q for c in R.coordinates for q in c.support}))
    C = [[c.exponent(q) for q in primes] for c in R.coordinates]
    t = [0 if c.sign > 0 else 1 for c in R.coordinates]
    return C, t, primes


def torus_relation_lattice(R: TorusPoint) -> RelationLattice:
    C, t, _ = _torus_matrix(R)
    lattice = relation_lattice(C, t, 2)
    for e in lattice.basis:
        value = Fraction(1)
        for c, exponent in zip(R.coordinates, e):
            value *= c.value ** exponent
        if value != 1:
            raise ConsistencyError(f"relation {e} does not annihilate {[str(c) for c in R.coordinates]}")
    return lattice


@dataclass(frozen=True)
class ComponentData:
    n_R: int
    component_character: Tuple[int, ...]
    unit_rows: Tuple[Tuple[int, ...], ...]
    character_value: Fraction = Fraction(0)

    def n_R_l(self, ell: int) -> int:
        return ell ** valuation(self.n_R, ell)

    def n_R_parts(self, primes: Sequence[int]) -> Dict[int, int]:
        return {ell: self.n_R_l(ell) for ell in primes}


class PresentationKind(str, Enum):
    TORUS = "torus"
    DECLARED = "declared"


@dataclass(frozen=True)
class PresentedSubgroup:
    kind: PresentationKind
    coefficients: Tuple[Tuple[int, ...], ...]
    torsion_offsets: Tuple[int, ...]
    torsion_order: int
    blocks: Tuple[int, ...]
    lattice: RelationLattice
    components: ComponentData
    generator_labels: Tuple[str, ...] = field(default=(), compare=False)

    @property
    def rank(self) -> int:
        return len(self.torsion_offsets)

    @property
    def declared(self) -> bool:
        return self.kind == PresentationKind.DECLARED

    @property
    def variables_per_coordinate(self) -> int:
        return 1 if self.kind == PresentationKind.TORUS else 2

    @property
    def variable_count(self) -> int:
        return self.rank * self.variables_per_coordinate

    def block_variables(self, block: int) -> range:
        start = sum(self.blocks[:block]) * self.variables_per_coordinate
        return range(start, start + self.blocks[block] * self.variables_per_coordinate)


def component_data(P: PresentedSubgroup) -> ComponentData:
    return _component_data(P.lattice, P.torsion_offsets, P.torsion_order)


def _component_data(lattice: RelationLattice, offsets: Sequence[int], torsion_order: int) -> ComponentData:
    if not lattice.basis:
        return ComponentData(1, (), ())
    snf = smith_normal_decomposition(lattice.basis)
    divisors = snf.diagonal[:snf.rank]
    nontrivial = [i for i, d in enumerate(divisors) if d > 1]
    if len(nontrivial) > 1:
        raise PresentationError(
            f"component torsion {[divisors[i] for i in nontrivial]} is not cyclic; check the declared relations")
    unit_rows = tuple(tuple(snf.V_inverse[i]) for i, d in enumerate(divisors) if d == 1)
    if not nontrivial:
        return ComponentData(1, (), unit_rows)

    index = nontrivial[0]
    n_R = divisors[index]
    character = tuple(_leading_positive(snf.V_inverse[index]))
    numerator = sum(e * o for e, o in zip(character, offsets)) % torsion_order
    value = Fraction(numerator, torsion_order)
    if value.denominator != n_R:
        raise PresentationError(f"component character has order {value.denominator}, expected {n_R}")
    return ComponentData(n_R, character, unit_rows, value)


def _build(kind: PresentationKind, C: Sequence[Sequence[int]], offsets: Sequence[int],
           torsion_order: int, blocks: Sequence[int], lattice: RelationLattice,
           labels: Sequence[str]) -> PresentedSubgroup:
    if sum(blocks) != len(offsets):
        raise ConfigurationError(f"blocks {tuple(blocks)} do not cover {len(offsets)} coordinates")
    components = _component_data(lattice, offsets, torsion_order)
    presented = PresentedSubgroup(kind, tuple(tuple(r) for r in C), tuple(offsets), torsion_order,
                                  tuple(blocks), lattice, components, tuple(labels))
    logger.debug("Presented %s subgroup: rank %d, L = %s, n_R = %d",
                 kind.value, presented.rank, lattice.basis, components.n_R)
    return presented


def torus_presentation(points: Sequence[TorusPoint]) -> PresentedSubgroup:
    combined = TorusPoint(tuple(c for R in points for c in R.coordinates))
    C, t, primes = _torus_matrix(combined)
    lattice = torus_relation_lattice(combined)
    return _build(PresentationKind.TORUS, C, t, 2, [R.rank for R in points], lattice,
                  [str(q) for q in primes] + ["-1"])


def declared_presentation(coefficients: Sequence[Sequence[int]], offsets: Sequence[int],
                          torsion_order: int, blocks: Sequence[int],
                          labels: Sequence[str] = ()) -> PresentedSubgroup:
    """Elliptic products: relations asserted by the user, never verified."""
    if torsion_order < 1:
        raise ConfigurationError("torsion order must be positive")
    widths = {len(row) for row in coefficients}
    if len(widths) > 1:
        raise ConfigurationError("coefficient rows have different lengths")
    lattice = relation_lattice(coefficients, [o % torsion_order for o in offsets], torsion_order)
    return _build(PresentationKind.DECLARED, coefficients, [o % torsion_order for o in offsets],
                  torsion_order, blocks, lattice, labels)


##############################################################################
# Linear congruences
##############################################################################

@dataclass(frozen=True)
class SolutionSpace:
    """Affine solution set {x : A x = b mod N}: particular + span of generators (with additive orders)."""
    modulus: int
    width: int
    particular: Optional[Tuple[int, ...]]
    generators: Tuple[Tuple[Tuple[int, ...], int], ...] = ()
    rows: Tuple[Tuple[int, ...], ...] = ()
    rhs: Tuple[int, ...] = ()

    @property
    def is_empty(self) -> bool:
        return self.particular is None

    @property
    def size(self) -> int:
        if self.is_empty:
            return 0
        return math.prod(order for _, order in self.generators)

    def _combine(self, coefficients: Sequence[int]) -> Tuple[int, ...]:
        x = list(self.particular)
        for (vector, _), c in zip(self.generators, coefficients):
            if c:
                for i, v in enumerate(vector):
                    x[i] += c * v
        return tuple(v % self.modulus for v in x)

    def elements(self) -> Iterator[Tuple[int, ...]]:
        if self.is_empty:
            return
        for coefficients in itertools.product(*(range(order) for _, order in self.generators)):
            yield self._combine(coefficients)

    def sample(self, rng: random.Random) -> Tuple[int, ...]:
        return self._combine([rng.randrange(order) for _, order in self.generators])

    def contains(self, x: Sequence[int]) -> bool:
        if len(x) != self.width:
            return False
        return all((sum(a * v for a, v in zip(row, x)) - b) % self.modulus == 0
                   for row, b in zip(self.rows, self.rhs))


def solve_congruences(rows: Sequence[Sequence[int]], rhs: Sequence[int], modulus: int,
                      width: Optional[int] = None) -> SolutionSpace:
    width = len(rows[0]) if rows else (width or 0)
    frozen_rows = tuple(tuple(int(a) for a in row) for row in rows)
    frozen_rhs = tuple(int(b) % modulus for b in rhs)
    empty = SolutionSpace(modulus, width, None, (), frozen_rows, frozen_rhs)

    snf = smith_normal_decomposition(frozen_rows, width)
    diagonal = snf.diagonal
    c = [sum(u * b for u, b in zip(snf.U[i], frozen_rhs)) % modulus for i in range(len(frozen_rows))]

    y0 = [0] * width
    generators = []
    for i in range(len(frozen_rows)):
        d = diagonal[i] if i < len(diagonal) else 0
        if d == 0:
            if c[i]:
                return empty
            continue
        g = math.gcd(d, modulus)
        if c[i] % g:
            return empty
        step = modulus // g
        if step > 1:
            y0[i] = (c[i] // g) * pow(d // g, -1, step) % step
        if g > 1:
            generators.append((tuple(snf.V[r][i] * step % modulus for r in range(width)), g))
    for j in range(snf.rank, width):
        generators.append((tuple(snf.V[r][j] % modulus for r in range(width)), modulus))

    particular = tuple(sum(snf.V[r][j] * y0[j] for j in range(width)) % modulus for r in range(width))
    return SolutionSpace(modulus, width, particular, tuple(generators), frozen_rows, frozen_rhs)


##############################################################################
# Components and torsion
##############################################################################

def _embedded_value(components: ComponentData, j: int, modulus: int) -> Optional[int]:
    """jR's character value as an element of Z/modulus, None when it is not modulus-torsion."""
    w = components.character_value * j
    w -= math.floor(w)
    scaled = w * modulus
    if scaled.denominator != 1:
        return None
    return int(scaled) % modulus


def _component_system(P: PresentedSubgroup, modulus: int, j: int):
    vpc = P.variables_per_coordinate
    width = P.variable_count
    rows: IntMatrix = []
    rhs: List[int] = []

    def add(e, value):
        for s in range(vpc):
            row = [0] * width
            for c, coefficient in enumerate(e):
                row[c * vpc + s] = coefficient
            rows.append(row)
            rhs.append(value if s == 0 else 0)

    for w in P.components.unit_rows:
        add(w, 0)
    if P.components.n_R > 1:
        value = _embedded_value(P.components, j, modulus)
        if value is None:
            return None
        add(P.components.component_character, value)
    return rows, rhs


def component_torsion(P: PresentedSubgroup, modulus: int, j: int) -> SolutionSpace:
    """G^j_R[modulus] as exponent vectors modulo `modulus`."""
    if not 0 <= j < P.components.n_R:
        raise ConfigurationError(f"component index {j} outside 0..{P.components.n_R - 1}")
    system = _component_system(P, modulus, j)
    if system is None:
        return SolutionSpace(modulus, P.variable_count, None)
    rows, rhs = system
    return solve_congruences(rows, rhs, modulus, P.variable_count)


def torsion_in_component(P: PresentedSubgroup, ell: int, A: int, j: int) -> SolutionSpace:
    if A < 1:
        raise ConfigurationError("level A must be at least 1")
    return component_torsion(P, ell ** A, j)


##############################################################################
# The criterion
##############################################################################

class Verdict(str, Enum):
    FINITE = "Finite"
    POSITIVE_DENSITY = "PositiveDensity"


@dataclass(frozen=True)
class Target:
    """Exact l-adic valuations a_{l,i}, one tuple per prime l over the study points."""
    name: str
    valuations: Tuple[Tuple[int, Tuple[int, ...]], ...]

    @classmethod
    def of(cls, name: str, valuations: Dict[int, Sequence[int]]) -> "Target":
        return cls(name, tuple(sorted((ell, tuple(a)) for ell, a in valuations.items())))

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(ell for ell, _ in self.valuations)

    def at(self, ell: int) -> Tuple[int, ...]:
        for prime, a in self.valuations:
            if prime == ell:
                return a
        raise ConfigurationError(f"target {self.name} has no valuations at {ell}")

    def __str__(self) -> str:
        return "; ".join(f"{ell}: {', '.join(map(str, a))}" for ell, a in self.valuations)


@dataclass(frozen=True)
class Witness:
    """Torsion point of G^1_R as exponents modulo `modulus` (pairs per coordinate on curves)."""
    modulus: int
    exponents: Tuple[int, ...]
    variables_per_coordinate: int = 1

    def coordinates(self) -> List[Tuple[int, ...]]:
        vpc = self.variables_per_coordinate
        return [tuple(self.exponents[i:i + vpc]) for i in range(0, len(self.exponents), vpc)]

    def coordinate_orders(self) -> List[int]:
        return [self.modulus // math.gcd(self.modulus, *c) for c in self.coordinates()]

    def describe(self) -> str:
        if self.variables_per_coordinate == 1:
            return f"exponents ({', '.join(map(str, self.exponents))}) mod {self.modulus}"
        points = ", ".join("(" + ",".join(map(str, c)) + ")" for c in self.coordinates())
        return f"[{points}] mod {self.modulus} in a basis of E[{self.modulus}]"


@dataclass(frozen=True)
class EllVerdict:
    ell: int
    level: int
    found: bool
    component: Optional[int] = None
    witness: Optional[Witness] = None
    closed_form: Optional[bool] = None


@dataclass(frozen=True)
class CriterionVerdict:
    target: Target
    verdict: Verdict
    per_ell: Tuple[EllVerdict, ...]
    conditional: bool = False

    @property
    def witness(self) -> Optional[Dict[int, Witness]]:
        if self.verdict != Verdict.POSITIVE_DENSITY:
            return None
        return {v.ell: v.witness for v in self.per_ell}


def _order_rows(P: PresentedSubgroup, ell: int, caps: Sequence[int], modulus: int):
    rows, rhs = [], []
    width = P.variable_count
    for block, cap in enumerate(caps):
        factor = ell ** cap
        if factor % modulus == 0:
            continue
        for v in P.block_variables(block):
            row = [0] * width
            row[v] = factor
            rows.append(row)
            rhs.append(0)
    return rows, rhs


def _exact_count(P: PresentedSubgroup, base, ell: int, a: Sequence[int], modulus: int) -> int:
    """Solutions whose block i has exact order l^{a_i}, by inclusion-exclusion over blocks."""
    rows, rhs = base
    active = [i for i, value in enumerate(a) if value >= 1]
    total = 0
    for size in range(len(active) + 1):
        for lowered in itertools.combinations(active, size):
            caps = [value - 1 if i in lowered else value for i, value in enumerate(a)]
            extra_rows, extra_rhs = _order_rows(P, ell, caps, modulus)
            space = solve_congruences(rows + extra_rows, rhs + extra_rhs, modulus, P.variable_count)
            total += (-1) ** size * space.size
    return total


def _is_exact(P: PresentedSubgroup, x: Sequence[int], ell: int, a: Sequence[int], modulus: int) -> bool:
    for block, value in enumerate(a):
        if value == 0:
            continue
        factor = ell ** (value - 1)
        if all(factor * x[v] % modulus == 0 for v in P.block_variables(block)):
            return False
    return True


def _find_exact(P: PresentedSubgroup, space: SolutionSpace, ell: int, a: Sequence[int]) -> Optional[Tuple[int, ...]]:
    rng = random.Random(ell * 7919 + len(a))
    if space.size > WITNESS_SAMPLES:
        for _ in range(WITNESS_SAMPLES):
            x = space.sample(rng)
            if _is_exact(P, x, ell, a, space.modulus):
                return x
    for x in space.elements():
        if _is_exact(P, x, ell, a, space.modulus):
            return x
    return None


def _normalize(modulus: int, exponents: Sequence[int], vpc: int) -> Witness:
    g = math.gcd(modulus, *exponents)
    return Witness(modulus // g, tuple(e // g for e in exponents), vpc)


def _shift_to_first_component(P: PresentedSubgroup, x: Sequence[int], N: int, j: int) -> Witness:
    """Move a witness from G^j to G^1 by adding (1-j)X, X a torsion point of order n_R on G^1."""
    vpc = P.variables_per_coordinate
    n_R = P.components.n_R
    if j == 1 or n_R == 1:
        return _normalize(N, x, vpc)
    X = component_torsion(P, n_R, 1)
    if X.is_empty:
        raise PresentationError("no torsion point of order n_R on the first component")
    M = math.lcm(N, n_R)
    shifted = [(xi * (M // N) + (1 - j) * Xi * (M // n_R)) % M for xi, Xi in zip(x, X.particular)]
    return _normalize(M, shifted, vpc)


def verify_witness(P: PresentedSubgroup, ell: int, a: Sequence[int], witness: Witness) -> bool:
    """Independent re-check: witness lies on G^1_R and block i has exact l-valuation a_i."""
    if witness.variables_per_coordinate != P.variables_per_coordinate:
        return False
    if len(witness.exponents) != P.variable_count:
        return False
    j = 1 if P.components.n_R > 1 else 0
    system = _component_system(P, witness.modulus, j)
    if system is None:
        return False
    rows, rhs = system
    for row, b in zip(rows, rhs):
        if (sum(c * x for c, x in zip(row, witness.exponents)) - b) % witness.modulus:
            return False
    orders = witness.coordinate_orders()
    start = 0
    for block, size in enumerate(P.blocks):
        block_valuation = max(valuation(o, ell) for o in orders[start:start + size])
        if block_valuation != a[block]:
            return False
        start += size
    return True


def _decide_ell(P: PresentedSubgroup, ell: int, a: Sequence[int], extra_levels: int) -> EllVerdict:
    n_R = P.components.n_R
    A = max(a) + valuation(n_R, ell) + 1 + extra_levels
    N = ell ** A
    step = P.components.n_R_l(ell)
    candidates = [j for j in range(n_R) if (j - 1) % step == 0]
    candidates.sort(key=lambda j: j != 1 % max(n_R, 1))

    for j in candidates:
        system = _component_system(P, N, j)
        if system is None:
            continue
        rows, rhs = system
        if _exact_count(P, (rows, rhs), ell, a, N) <= 0:
            continue
        order_rows, order_rhs = _order_rows(P, ell, a, N)
        space = solve_congruences(rows + order_rows, rhs + order_rhs, N, P.variable_count)
        x = _find_exact(P, space, ell, a)
        if x is None:
            raise ConsistencyError(f"counted exact solutions at l={ell} but enumeration found none")
        witness = _shift_to_first_component(P, x, N, j)
        if not verify_witness(P, ell, a, witness):
            raise ConsistencyError(f"witness {witness.describe()} fails verification at l={ell}")
        return EllVerdict(ell, A, True, j, witness)
    return EllVerdict(ell, A, False)


def decide_criterion(P: PresentedSubgroup, target: Target, extra_levels: int = 0) -> CriterionVerdict:
    """Finite or positive density for the set of primes where block i has v_l(order) = a_{l,i}."""
    per_ell = []
    for ell in target.primes:
        a = target.at(ell)
        if len(a) != len(P.blocks):
            raise ConfigurationError(f"target {target.name} lists {len(a)} valuations at {ell}, "
                                     f"study has {len(P.blocks)} points")
        if any(value < 0 for value in a):
            raise ConfigurationError(f"target {target.name} has a negative valuation")
        outcome = _decide_ell(P, ell, a, extra_levels)

        # a single point of infinite order: a >= v_l(n_R)
        if len(P.blocks) == 1 and P.lattice.rank < P.rank:
            expected = a[0] >= valuation(P.components.n_R, ell)
            if expected != outcome.found:
                raise ConsistencyError(f"search and closed form disagree at l={ell} for {target.name}")
            outcome = EllVerdict(outcome.ell, outcome.level, outcome.found, outcome.component,
                                 outcome.witness, expected)
        logger.debug("Target %s at l=%d: level %d, witness %s", target.name, ell, outcome.level,
                     outcome.witness.describe() if outcome.witness else None)
        per_ell.append(outcome)

    verdict = Verdict.POSITIVE_DENSITY if all(v.found for v in per_ell) else Verdict.FINITE
    return CriterionVerdict(target, verdict, tuple(per_ell), P.declared)
