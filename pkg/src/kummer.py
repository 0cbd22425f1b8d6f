"""
Predicted densities for a single point r of the multiplicative group over Q.

At level n the Galois group of Q(zeta_{l^n}, r^{1/l^n}) is modelled by pairs
(u, b): u a unit mod l^n (action on roots of unity), b a residue mod l^n
(translation of a fixed l^n-th root of r). The group is full except at l = 2
when the squarefree part r* of r is -1, 2 or -2: then sqrt(r) lies in the
cyclotomic tower and (-1)^b = chi_{r*}(u).

For a pair with e = v_l(u - 1) < n, the Frobenius class decides the event
v_l(ord(r mod p)) <= a at level n: it holds iff e <= a + v_l(b). Pairs with
u = 1 mod l^n stay undecided. The decided mass grows geometrically in n, so
three consecutive levels determine the limit exactly.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterator, Optional, Tuple

import numpy as np

from src.arith import Factorization, squarefree_part
from src.errors import KummerError, LevelTooLowError, NoStabilizationError
from src.groups import FactoredRational

logger = logging.getLogger(__name__)

CHUNK = 1 << 20
# levels above a that exact_density is allowed to try
MAX_EXTRA_LEVELS = 24
ENTANGLED_SQUAREFREE = (-1, 2, -2)


@dataclass(frozen=True)
class KummerLevel:
    r: FactoredRational
    ell: int
    n: int
    entangled: bool
    r_star: int

    def character(self, u: int) -> int:
        return quadratic_character(self.r_star, u) if self.entangled else 1

    def contains(self, g: "GaloisElement") -> bool:
        modulus = self.ell ** self.n
        if not (0 <= g.u < modulus and 0 <= g.b < modulus) or g.u % self.ell == 0:
            return False
        if self.entangled:
            return (-1) ** g.b == self.character(g.u)
        return True

    def elements(self) -> Iterator["GaloisElement"]:
        """Every valid pair, in (u, b) order. Only sensible for small levels."""
        modulus = self.ell ** self.n
        for u in range(modulus):
            if u % self.ell == 0:
                continue
            for b in range(modulus):
                g = GaloisElement(u, b)
                if self.contains(g):
                    yield g


@dataclass(frozen=True)
class GaloisElement:
    u: int
    b: int

    def decides(self, level: KummerLevel) -> bool:
        return (self.u - 1) % level.ell ** level.n != 0

    def order_valuation_at_most(self, level: KummerLevel, a: int) -> bool:
        modulus = level.ell ** level.n
        return _int_valuation((self.u - 1) % modulus, level.ell, level.n) <= a + _int_valuation(
            self.b, level.ell, level.n)


def _int_valuation(x: int, ell: int, cap: int) -> int:
    if x == 0:
        return cap
    v = 0
    while x % ell == 0:
        x //= ell
        v += 1
    return v


def quadratic_character(r_star: int, u: int) -> int:
    """The character of Q(sqrt(r*)) on odd u, for r* in {-1, 2, -2}."""
    chi_minus_1 = 1 if u % 4 == 1 else -1
    chi_2 = 1 if u % 8 in (1, 7) else -1
    if r_star == -1:
        return chi_minus_1
    if r_star == 2:
        return chi_2
    if r_star == -2:
        return chi_minus_1 * chi_2
    raise KummerError(f"no 2-power cyclotomic character for squarefree part {r_star}")


##############################################################################
# Base normalization
##############################################################################

def normalize_base(r: FactoredRational, ell: int) -> Tuple[FactoredRational, int]:
    """(r', s) with r = r'^(l^s) and r' not an l-th power in Q."""
    exponents = [e for _, e in r.numerator_factors.prime_powers + r.denominator_factors.prime_powers]
    if not exponents:
        raise KummerError(f"base {r} is a root of unity")
    s = 0
    while all(e % ell ** (s + 1) == 0 for e in exponents):
        s += 1
    if s == 0:
        return r, 0
    if ell == 2 and r.sign < 0:
        raise KummerError(f"base {r} is minus an {ell}-th power; the model needs an l-power-free base")
    root = ell ** s
    num = {q: e // root for q, e in r.numerator_factors.prime_powers}
    den = {q: e // root for q, e in r.denominator_factors.prime_powers}
    reduced = FactoredRational(r.sign, Factorization.from_dict(num), Factorization.from_dict(den))
    return reduced, s


def build_level(r: FactoredRational, ell: int, n: int) -> KummerLevel:
    if n < 1:
        raise LevelTooLowError(f"level {n} below 1")
    reduced, s = normalize_base(r, ell)
    if s:
        raise KummerError(f"{r} = ({reduced})^{ell ** s}: use the base {reduced} and shift targets by {s}")
    r_star = squarefree_part(r.sign, r.numerator_factors, r.denominator_factors)
    entangled = ell == 2 and r_star in ENTANGLED_SQUAREFREE
    if entangled and n < 3:
        raise LevelTooLowError("entangled levels start at n = 3")
    return KummerLevel(r, ell, n, entangled, r_star)


##############################################################################
# Literal enumeration
##############################################################################

def _valuations(values: np.ndarray, ell: int, cap: int) -> np.ndarray:
    v = np.zeros(values.shape, dtype=np.int64)
    work = values.copy()
    active = work != 0
    for _ in range(cap):
        active &= (work % ell == 0)
        if not active.any():
            break
        v[active] += 1
        work[active] //= ell
    v[values == 0] = cap
    return v


def _characters(units: np.ndarray, r_star: int) -> np.ndarray:
    chi_minus_1 = np.where(units % 4 == 1, 1, -1)
    rem = units % 8
    chi_2 = np.where((rem == 1) | (rem == 7), 1, -1)
    if r_star == -1:
        return chi_minus_1
    if r_star == 2:
        return chi_2
    return chi_minus_1 * chi_2


@lru_cache(maxsize=256)
def _histograms(ell: int, n: int, r_star: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    u-histogram indexed [e, odd character] and b-histogram indexed [v_l(b), b mod 2],
    built by generating every u and every b at level n in chunks.
    r_star = 0 means no entanglement.
    """
    modulus = ell ** n
    u_hist = np.zeros((n + 1, 2), dtype=np.int64)
    b_hist = np.zeros((n + 1, 2), dtype=np.int64)
    for start in range(0, modulus, CHUNK):
        values = np.arange(start, min(start + CHUNK, modulus), dtype=np.int64)

        b_val = _valuations(values, ell, n)
        np.add.at(b_hist, (b_val, values % 2), 1)

        units = values[values % ell != 0]
        e = _valuations((units - 1) % modulus, ell, n)
        if r_star:
            odd = (_characters(units, r_star) == -1).astype(np.int64)
        else:
            odd = np.zeros(units.shape, dtype=np.int64)
        np.add.at(u_hist, (e, odd), 1)
    return u_hist, b_hist


def level_counts(level: KummerLevel, a: int) -> Tuple[int, int]:
    """(decided pairs with e <= a + v_l(b), all valid pairs) at the level."""
    n = level.n
    u_hist, b_hist = _histograms(level.ell, n, level.r_star if level.entangled else 0)
    matches = 0
    valid = 0
    for e in range(n + 1):
        for odd in (0, 1):
            count_u = int(u_hist[e, odd])
            if not count_u:
                continue
            for vb in range(n + 1):
                for parity in (0, 1):
                    count_b = int(b_hist[vb, parity])
                    if not count_b:
                        continue
                    if level.entangled and parity != odd:
                        continue
                    valid += count_u * count_b
                    if e < n and e <= a + vb:
                        matches += count_u * count_b
    return matches, valid


def raw_proportion(level: KummerLevel, a: int) -> Fraction:
    if a < 0:
        return Fraction(0)
    matches, valid = level_counts(level, a)
    return Fraction(matches, valid)


def _completed(r: FactoredRational, ell: int, n: int, a: int) -> Optional[Fraction]:
    """Geometric-tail completion from levels n-2, n-1, n; None while the tail is not yet geometric."""
    if a < 0:
        return Fraction(0)
    raws = [raw_proportion(build_level(r, ell, m), a) for m in (n - 2, n - 1, n)]
    previous = raws[1] - raws[0]
    last = raws[2] - raws[1]
    if last == 0:
        return raws[2]
    if previous == 0:
        return None
    ratio = last / previous
    if ratio >= 1:
        return None
    return raws[2] + last * ratio / (1 - ratio)


def _check_level(ell: int, n: int, a: int, entangled: bool):
    if n < a + 3:
        raise LevelTooLowError(f"level {n} too low for a = {a}: need n >= {a + 3}")
    if n - 2 < (3 if entangled else 1):
        raise LevelTooLowError(f"level {n} too low to complete an entangled tower")


def level_density_leq(level: KummerLevel, a: int) -> Fraction:
    """Completed proportion of the event v_l(ord(r mod p)) <= a at this level."""
    _check_level(level.ell, level.n, a, level.entangled)
    value = _completed(level.r, level.ell, level.n, a)
    return value if value is not None else raw_proportion(level, a)


def exact_density(r: FactoredRational, ell: int, a: int) -> Fraction:
    """D(v_l(ord(r mod p)) = a) for an l-power-free base, raising the level until it stabilizes."""
    if a < 0:
        raise KummerError("a must be nonnegative")
    first = build_level(r, ell, 3)
    n = max(a + 3, 5 if first.entangled else 3)
    previous = None
    while n <= a + MAX_EXTRA_LEVELS:
        upper = _completed(r, ell, n, a)
        lower = _completed(r, ell, n, a - 1) if a > 0 else Fraction(0)
        value = None if upper is None or lower is None else upper - lower
        logger.debug("Level %d for r=%s, l=%d, a=%d: %s", n, r, ell, a, value)
        if value is not None and value == previous:
            return value
        previous = value
        n += 1
    raise NoStabilizationError(f"no stabilization for r={r}, l={ell}, a={a} up to level {a + MAX_EXTRA_LEVELS}")


def exact_density_of_power(r: FactoredRational, ell: int, a: int) -> Fraction:
    """Densities for bases that are l-th powers: r = r'^(l^s) shifts valuations down by s."""
    reduced, s = normalize_base(r, ell)
    if s == 0:
        return exact_density(r, ell, a)
    if a >= 1:
        return exact_density(reduced, ell, a + s)
    return sum((exact_density(reduced, ell, b) for b in range(s + 1)), Fraction(0))
