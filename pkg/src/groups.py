"""
Group models over Q and their reductions modulo p.

Two families are supported: split tori G_m^k (points are tuples of nonzero
rationals) and elliptic curves in general Weierstrass form (points are
tuples of rational points, one study point living in E^k). Reduced points
are tuples too, so a point of a product group is handled coordinatewise.
"""

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

from sympy.ntheory import sqrt_mod

from src.arith import (
    Factorization,
    PrimeContext,
    factorize,
    order_from_multiple,
    order_valuation,
    valuation,
)
from src.errors import (
    ConfigurationError,
    ExclusionError,
    ExclusionReason,
    PointNotOnCurveError,
    TorsionCollisionError,
)

logger = logging.getLogger(__name__)

# Mazur: rational torsion points have order at most 12
MAX_RATIONAL_TORSION = 12
DEFAULT_BSGS_POINTS = 8
DEFAULT_EXHAUSTIVE_BELOW = 1000


##############################################################################
# Torus coordinates
##############################################################################

@dataclass(frozen=True)
class FactoredRational:
    sign: int
    numerator_factors: Factorization
    denominator_factors: Factorization

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        shared = set(self.numerator_factors.primes) & set(self.denominator_factors.primes)
        if shared:
            raise ValueError(f"numerator and denominator share primes {sorted(shared)}")

    @classmethod
    def from_fraction(cls, value: Union[Fraction, int, str]) -> "FactoredRational":
        q = Fraction(value)
        if q == 0:
            raise ConfigurationError("torus coordinates must be nonzero")
        sign, num = factorize(q.numerator)
        _, den = factorize(q.denominator)
        return cls(sign, num, den)

    @cached_property
    def numerator(self) -> int:
        return self.numerator_factors.value()

    @cached_property
    def denominator(self) -> int:
        return self.denominator_factors.value()

    @property
    def value(self) -> Fraction:
        return Fraction(self.sign * self.numerator, self.denominator)

    @property
    def support(self) -> Tuple[int, ...]:
        return tuple(sorted(self.numerator_factors.primes + self.denominator_factors.primes))

    def exponent(self, prime: int) -> int:
        return self.numerator_factors.exponent(prime) - self.denominator_factors.exponent(prime)

    def power(self, b: int) -> "FactoredRational":
        if b < 1:
            raise ValueError("power expects a positive exponent")
        num = Factorization(tuple((q, e * b) for q, e in self.numerator_factors.prime_powers))
        den = Factorization(tuple((q, e * b) for q, e in self.denominator_factors.prime_powers))
        return FactoredRational(self.sign ** b, num, den)

    def residue(self, p: int) -> int:
        if self.denominator % p == 0:
            raise ExclusionError(ExclusionReason.DENOMINATOR, f"{p} divides denominator of {self}")
        if self.numerator % p == 0:
            raise ExclusionError(ExclusionReason.NUMERATOR, f"{p} divides numerator of {self}")
        return self.sign * self.numerator * pow(self.denominator, -1, p) % p

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class TorusPoint:
    coordinates: Tuple[FactoredRational, ...]

    def __post_init__(self):
        if not self.coordinates:
            raise ConfigurationError("a torus point needs at least one coordinate")

    @property
    def rank(self) -> int:
        return len(self.coordinates)

    def power(self, b: int) -> "TorusPoint":
        return TorusPoint(tuple(c.power(b) for c in self.coordinates))


@dataclass(frozen=True)
class ReducedTorusPoint:
    p: int
    residues: Tuple[int, ...]

    def is_identity(self) -> bool:
        return all(x == 1 for x in self.residues)

    def scale(self, n: int) -> "ReducedTorusPoint":
        return ReducedTorusPoint(self.p, tuple(pow(x, n, self.p) for x in self.residues))


def reduce_torus_point(R: TorusPoint, ctx: PrimeContext) -> ReducedTorusPoint:
    return ReducedTorusPoint(ctx.p, tuple(c.residue(ctx.p) for c in R.coordinates))


def torus_order_valuation(R: TorusPoint, ctx: PrimeContext, ell: int) -> int:
    if ctx.p == ell:
        raise ExclusionError(ExclusionReason.STUDIED_PRIME, f"p = ell = {ell}")
    reduced = reduce_torus_point(R, ctx)
    return max(order_valuation(x, ctx, ell) for x in reduced.residues)


def torus_point_order(Rbar: ReducedTorusPoint, ctx: PrimeContext) -> int:
    return order_from_multiple(lambda k: Rbar.scale(k).is_identity(), ctx.p - 1, ctx.p_minus_1)


##############################################################################
# Elliptic curves
##############################################################################

class _PrimeField:
    def __init__(self, p: int):
        self.p = p

    def norm(self, a):
        return a % self.p

    def div(self, a, b):
        return a * pow(b, -1, self.p) % self.p

    def is_zero(self, a) -> bool:
        return a % self.p == 0


class _RationalField:
    def norm(self, a):
        return Fraction(a)

    def div(self, a, b):
        return Fraction(a) / b

    def is_zero(self, a) -> bool:
        return a == 0


_QQ = _RationalField()

AffinePoint = Optional[Tuple]   # None is the point at infinity


@dataclass(frozen=True)
class WeierstrassCurve:
    a1: int
    a2: int
    a3: int
    a4: int
    a6: int
    discriminant: int = field(default=0, compare=False)

    def __post_init__(self):
        disc = curve_discriminant(self.a1, self.a2, self.a3, self.a4, self.a6)
        if disc == 0:
            raise ConfigurationError(f"singular curve {self.coefficients}")
        if self.discriminant not in (0, disc):
            raise ConfigurationError(f"discriminant {self.discriminant} does not match {disc}")
        object.__setattr__(self, "discriminant", disc)

    @property
    def coefficients(self) -> Tuple[int, int, int, int, int]:
        return (self.a1, self.a2, self.a3, self.a4, self.a6)

    def __str__(self) -> str:
        return "[" + ",".join(str(a) for a in self.coefficients) + "]"

    def contains(self, x, y) -> bool:
        lhs = y * y + self.a1 * x * y + self.a3 * y
        rhs = x ** 3 + self.a2 * x * x + self.a4 * x + self.a6
        return lhs == rhs

    # group law, valid in every characteristic
    def _add(self, P: AffinePoint, Q: AffinePoint, F) -> AffinePoint:
        if P is None:
            return Q
        if Q is None:
            return P
        a1, a2, a3, a4, a6 = self.coefficients
        x1, y1 = P
        x2, y2 = Q
        if F.is_zero(x1 - x2):
            if F.is_zero(y1 + y2 + a1 * x2 + a3):
                return None
            den = 2 * y1 + a1 * x1 + a3
            lam = F.div(3 * x1 * x1 + 2 * a2 * x1 + a4 - a1 * y1, den)
            nu = F.div(-x1 ** 3 + a4 * x1 + 2 * a6 - a3 * y1, den)
        else:
            lam = F.div(y2 - y1, x2 - x1)
            nu = F.div(y1 * x2 - y2 * x1, x2 - x1)
        x3 = F.norm(lam * lam + a1 * lam - a2 - x1 - x2)
        y3 = F.norm(-(lam + a1) * x3 - nu - a3)
        return (x3, y3)

    def _neg(self, P: AffinePoint, F) -> AffinePoint:
        if P is None:
            return None
        x, y = P
        return (x, F.norm(-y - self.a1 * x - self.a3))

    def _mul(self, n: int, P: AffinePoint, F) -> AffinePoint:
        if n < 0:
            return self._mul(-n, self._neg(P, F), F)
        result = None
        addend = P
        while n:
            if n & 1:
                result = self._add(result, addend, F)
            addend = self._add(addend, addend, F)
            n >>= 1
        return result


def curve_discriminant(a1: int, a2: int, a3: int, a4: int, a6: int) -> int:
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    b8 = a1 * a1 * a6 + 4 * a2 * a6 - a1 * a3 * a4 + a2 * a3 * a3 - a4 * a4
    return -b2 * b2 * b8 - 8 * b4 ** 3 - 27 * b6 * b6 + 9 * b2 * b4 * b6


@dataclass(frozen=True)
class CurvePointQ:
    x: Optional[Fraction] = None
    y: Optional[Fraction] = None

    @classmethod
    def on(cls, curve: WeierstrassCurve, x, y) -> "CurvePointQ":
        point = cls(Fraction(x), Fraction(y))
        if not curve.contains(point.x, point.y):
            raise PointNotOnCurveError(f"point ({x}, {y}) is not on curve {curve}")
        return point

    @classmethod
    def infinity(cls) -> "CurvePointQ":
        return cls()

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def affine(self) -> AffinePoint:
        return None if self.is_infinity else (self.x, self.y)

    def __str__(self) -> str:
        return "O" if self.is_infinity else f"({self.x},{self.y})"


def rational_point_order(curve: WeierstrassCurve, P: CurvePointQ) -> Optional[int]:
    """Exact order of a rational point, or None when it has infinite order."""
    acc = P.affine()
    for n in range(1, MAX_RATIONAL_TORSION + 1):
        if acc is None:
            return n
        acc = curve._add(acc, P.affine(), _QQ)
    return None


def rational_add(curve: WeierstrassCurve, P: CurvePointQ, Q: CurvePointQ) -> CurvePointQ:
    out = curve._add(P.affine(), Q.affine(), _QQ)
    return CurvePointQ.infinity() if out is None else CurvePointQ(*out)


def rational_multiple(curve: WeierstrassCurve, n: int, P: CurvePointQ) -> CurvePointQ:
    out = curve._mul(n, P.affine(), _QQ)
    return CurvePointQ.infinity() if out is None else CurvePointQ(*out)


@dataclass(frozen=True)
class ReducedCurvePoint:
    curve: WeierstrassCurve
    p: int
    points: Tuple[AffinePoint, ...]

    @property
    def _field(self) -> _PrimeField:
        return _PrimeField(self.p)

    def is_identity(self) -> bool:
        return all(P is None for P in self.points)

    def scale(self, n: int) -> "ReducedCurvePoint":
        F = self._field
        return ReducedCurvePoint(self.curve, self.p, tuple(self.curve._mul(n, P, F) for P in self.points))


ReducedPoint = Union[ReducedTorusPoint, ReducedCurvePoint]


def check_good_reduction(curve: WeierstrassCurve, p: int):
    if curve.discriminant % p == 0:
        raise ExclusionError(ExclusionReason.BAD_REDUCTION, f"{p} divides discriminant {curve.discriminant}")


def _reduce_affine(P: CurvePointQ, p: int) -> AffinePoint:
    if P.is_infinity:
        return None
    if P.x.denominator % p == 0 or P.y.denominator % p == 0:
        raise ExclusionError(ExclusionReason.DENOMINATOR, f"{p} divides a denominator of {P}")
    return (P.x.numerator * pow(P.x.denominator, -1, p) % p,
            P.y.numerator * pow(P.y.denominator, -1, p) % p)


def curve_reduce(curve: WeierstrassCurve, P: Union[CurvePointQ, Sequence[CurvePointQ]],
                 ctx: PrimeContext) -> ReducedCurvePoint:
    """Reduce one rational point (or a tuple of them) modulo p."""
    check_good_reduction(curve, ctx.p)
    points = (P,) if isinstance(P, CurvePointQ) else tuple(P)
    return ReducedCurvePoint(curve, ctx.p, tuple(_reduce_affine(Q, ctx.p) for Q in points))


##############################################################################
# Point counting
##############################################################################

def _count_points_exhaustive(curve: WeierstrassCurve, p: int) -> int:
    a1, a2, a3, a4, a6 = curve.coefficients
    if p == 2:
        return 1 + sum(1 for x in range(2) for y in range(2)
                       if (y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6) % 2 == 0)
    half = (p - 1) // 2
    total = 1
    for x in range(p):
        h = a1 * x + a3
        disc = (h * h + 4 * (x ** 3 + a2 * x * x + a4 * x + a6)) % p
        if disc == 0:
            total += 1
        elif pow(disc, half, p) == 1:
            total += 2
    return total


def _random_point(curve: WeierstrassCurve, p: int, rng: random.Random) -> AffinePoint:
    a1, a2, a3, a4, a6 = curve.coefficients
    inv2 = pow(2, -1, p)
    while True:
        x = rng.randrange(p)
        h = (a1 * x + a3) % p
        disc = (h * h + 4 * (x ** 3 + a2 * x * x + a4 * x + a6)) % p
        if disc == 0:
            return (x, (-h) * inv2 % p)
        if pow(disc, (p - 1) // 2, p) == 1:
            s = sqrt_mod(disc, p)
            return (x, (s - h) * inv2 % p)


def _bsgs_multiple(curve: WeierstrassCurve, p: int, Q: AffinePoint, lo: int, hi: int) -> int:
    """Some k in [lo, hi] with kQ = O, by baby-step giant-step over the interval."""
    F = _PrimeField(p)
    m = math.isqrt(hi - lo) + 1
    baby = {}
    acc = None
    for j in range(m):
        baby.setdefault(acc, j)
        acc = curve._add(acc, Q, F)
    step = curve._mul(m, Q, F)
    giant = curve._mul(lo, Q, F)
    for i in range(m + 1):
        j = baby.get(curve._neg(giant, F))
        if j is not None:
            k = lo + i * m + j
            if k <= hi:
                return k
        giant = curve._add(giant, step, F)
    raise ArithmeticError(f"no multiple of the point order in the Hasse interval at p={p}")


def curve_group_order(curve: WeierstrassCurve, ctx: PrimeContext, seed: int = 0,
                      bsgs_points: int = DEFAULT_BSGS_POINTS,
                      exhaustive_below: int = DEFAULT_EXHAUSTIVE_BELOW) -> int:
    """#E(F_p): exhaustive below the threshold, BSGS with lcm accumulation above it."""
    p = ctx.p
    check_good_reduction(curve, p)
    if p < max(exhaustive_below, 5):
        return _count_points_exhaustive(curve, p)

    width = math.isqrt(4 * p)
    lo, hi = p + 1 - width, p + 1 + width
    rng = random.Random(seed * 1_000_003 + p)
    F = _PrimeField(p)
    exponent = 1
    for _ in range(bsgs_points):
        Q = _random_point(curve, p, rng)
        k = _bsgs_multiple(curve, p, Q, lo, hi)
        order_q = order_from_multiple(lambda n: curve._mul(n, Q, F) is None, k, factorize(k)[1])
        exponent = math.lcm(exponent, order_q)
        first = -(-lo // exponent) * exponent
        if first + exponent > hi:
            return first
    logger.debug("BSGS ambiguous at p=%d (exponent %d), counting exhaustively", p, exponent)
    return _count_points_exhaustive(curve, p)


def tuple_order(Pbar: ReducedPoint, N: int, N_factors: Factorization) -> int:
    """Order of a product point: lcm of the coordinate orders, by descent on the whole tuple."""
    return order_from_multiple(lambda k: Pbar.scale(k).is_identity(), N, N_factors)


def curve_point_order(Pbar: ReducedCurvePoint, N: int, N_factors: Factorization) -> int:
    return tuple_order(Pbar, N, N_factors)


##############################################################################
# l-primary parts and torsion matching
##############################################################################

@dataclass(frozen=True)
class LPart:
    ell: int
    a: int
    component: ReducedPoint


def l_primary_part(g: ReducedPoint, order: int, ell: int) -> LPart:
    """Split off the l-power-order summand: order = l^a * m gives t = (m * (m^-1 mod l^a)) * g."""
    a = valuation(order, ell)
    if a == 0:
        return LPart(ell, 0, g.scale(0))
    m = order // ell ** a
    coefficient = m * pow(m, -1, ell ** a)
    return LPart(ell, a, g.scale(coefficient))


@dataclass(frozen=True)
class TorusTorsionClass:
    """Galois class of a torsion point of G_m^k over Q: one exact order per coordinate."""
    orders: Tuple[int, ...]

    @property
    def order(self) -> int:
        return math.lcm(*self.orders)

    def __str__(self) -> str:
        def one(n):
            return {1: "1", 2: "-1"}.get(n, f"mu({n})")
        return " ; ".join(one(n) for n in self.orders)


@dataclass(frozen=True)
class CurveTorsion:
    points: Tuple[CurvePointQ, ...]
    order: int

    def __str__(self) -> str:
        return ", ".join(str(P) for P in self.points)


TorsionDescriptor = Union[TorusTorsionClass, CurveTorsion]


def _lpower_order(x: int, p: int, ell: int) -> int:
    order = 1
    while x != 1:
        x = pow(x, ell, p)
        order *= ell
    return order


def check_torsion_list(torsion_list: Sequence[TorsionDescriptor]):
    seen = set()
    for item in torsion_list:
        key = item.orders if isinstance(item, TorusTorsionClass) else item.points
        if key in seen:
            raise TorsionCollisionError(f"torsion list repeats {item}")
        seen.add(key)


def match_l_part(part: LPart, torsion_list: Sequence[TorsionDescriptor]) -> Optional[int]:
    """Index of the listed torsion point whose reduction is the l-part, or None."""
    component = part.component
    if isinstance(component, ReducedTorusPoint):
        check_torsion_list(torsion_list)
        orders = tuple(_lpower_order(x, component.p, part.ell) for x in component.residues)
        for index, item in enumerate(torsion_list):
            if item.orders == orders:
                return index
        return None

    p = component.p
    ctx = PrimeContext(p)
    reduced: List[ReducedCurvePoint] = []
    for item in torsion_list:
        if item.order % p == 0:
            raise ExclusionError(ExclusionReason.TORSION_ORDER, f"{p} divides torsion order {item.order}")
        value = curve_reduce(component.curve, item.points, ctx)
        if value in reduced:
            raise TorsionCollisionError(f"two listed torsion points reduce to the same point mod {p}")
        reduced.append(value)
    for index, value in enumerate(reduced):
        if value == component:
            return index
    return None


def torsion_order(curve: WeierstrassCurve, points: Sequence[CurvePointQ]) -> int:
    """Exact order of a tuple of rational torsion points (lcm of coordinate orders)."""
    orders = []
    for P in points:
        n = rational_point_order(curve, P)
        if n is None:
            raise ConfigurationError(f"{P} has infinite order on {curve}")
        orders.append(n)
    return math.lcm(*orders)
