"""
Exact integer arithmetic for the scans: primes, factorizations, valuations
and multiplicative orders modulo a prime.

Everything here is integer-only and pure. numpy is used for the sieve and
for vectorized trial division; sympy provides primality and Pollard rho.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from sympy import isprime as _sympy_isprime
from sympy.ntheory import pollard_rho

from src.config import get_settings
from src.errors import FactorizationBudgetError, NotAUnitError

logger = logging.getLogger(__name__)

# bytes of sieve flags per segment; small enough to stay in L2
SEGMENT_SIZE = 1 << 18

RHO_SEEDS = (1234, 4321, 2718, 3141, 1618, 1414, 1732, 2236)


@dataclass(frozen=True)
class Factorization:
    prime_powers: Tuple[Tuple[int, int], ...] = ()

    def __post_init__(self):
        previous = 1
        for prime, exponent in self.prime_powers:
            if prime <= previous or exponent < 1:
                raise ValueError(f"malformed factorization {self.prime_powers}")
            previous = prime

    @classmethod
    def from_dict(cls, exponents: Dict[int, int]) -> "Factorization":
        return cls(tuple(sorted((q, e) for q, e in exponents.items() if e > 0)))

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(q for q, _ in self.prime_powers)

    def exponent(self, prime: int) -> int:
        for q, e in self.prime_powers:
            if q == prime:
                return e
        return 0

    def value(self) -> int:
        out = 1
        for q, e in self.prime_powers:
            out *= q**e
        return out

    def __str__(self) -> str:
        if not self.prime_powers:
            return "1"
        return "·".join(f"{q}^{e}" if e > 1 else str(q) for q, e in self.prime_powers)


@dataclass(frozen=True)
class PrimeContext:
    """Residue field F_p plus the factorization of p-1 (computed on first use)."""
    p: int

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"not a prime: {self.p}")

    @cached_property
    def p_minus_1(self) -> Factorization:
        return factorize(self.p - 1)[1] if self.p > 2 else Factorization()


##############################################################################
# Primes
##############################################################################

def _small_sieve(limit: int) -> np.ndarray:
    if limit < 2:
        return np.array([], dtype=np.int64)
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for q in range(2, math.isqrt(limit) + 1):
        if flags[q]:
            flags[q * q::q] = False
    return np.flatnonzero(flags).astype(np.int64)


def segment_primes(lo: int, hi: int, base: Optional[np.ndarray] = None) -> np.ndarray:
    """Primes in [lo, hi), sieved segment by segment with base primes up to sqrt(hi)."""
    lo = max(lo, 2)
    if hi <= lo:
        return np.array([], dtype=np.int64)
    if base is None:
        base = _small_sieve(math.isqrt(hi - 1) + 1)

    chunks = []
    start = lo
    while start < hi:
        stop = min(start + SEGMENT_SIZE, hi)
        flags = np.ones(stop - start, dtype=bool)
        for q in base:
            q = int(q)
            if q * q >= stop:
                break
            first = max(q * q, ((start + q - 1) // q) * q)
            if first >= stop:
                continue
            flags[first - start::q] = False
        chunks.append(np.flatnonzero(flags).astype(np.int64) + start)
        start = stop
    return np.concatenate(chunks) if chunks else np.array([], dtype=np.int64)


def sieve_primes(bound: int) -> List[int]:
    """All primes <= bound in ascending order (empty below 2)."""
    if bound < 2:
        return []
    return segment_primes(2, bound + 1).tolist()


@lru_cache(maxsize=4)
def _trial_primes(limit: int) -> np.ndarray:
    return _small_sieve(limit)


def is_prime(n: int) -> bool:
    return n >= 2 and bool(_sympy_isprime(n))


##############################################################################
# Factorization
##############################################################################

def _trial_divide(m: int, limit: int, exponents: Dict[int, int]) -> int:
    primes = _trial_primes(limit)
    bound = math.isqrt(m)
    if m < 2**62:
        # vectorized divisibility test, then exact division in Python ints
        candidates = primes[primes <= bound]
        hits = candidates[(m % candidates) == 0].tolist()
    else:
        hits = (int(q) for q in primes if m % int(q) == 0)
    for q in hits:
        while m % q == 0:
            m //= q
            exponents[q] = exponents.get(q, 0) + 1
    return m


def _split_with_rho(m: int, exponents: Dict[int, int], factor_max: int):
    if m == 1:
        return
    if is_prime(m):
        exponents[m] = exponents.get(m, 0) + 1
        return
    if m > factor_max:
        raise FactorizationBudgetError(m)
    for seed in RHO_SEEDS:
        d = pollard_rho(m, seed=seed, retries=5)
        if d and 1 < d < m:
            _split_with_rho(d, exponents, factor_max)
            _split_with_rho(m // d, exponents, factor_max)
            return
    raise FactorizationBudgetError(m)


@lru_cache(maxsize=1)
def _factor_budget() -> Tuple[int, int]:
    settings = get_settings()
    return settings.factor_trial_limit, settings.factor_max


def factorize(n: int, trial_limit: Optional[int] = None,
              factor_max: Optional[int] = None) -> Tuple[int, Factorization]:
    """
    Return (sign, factorization of |n|): trial division first, Pollard rho for the rest.
    Limits default to REDLAB_FACTOR_TRIAL_LIMIT and REDLAB_FACTOR_MAX.
    """
    if n == 0:
        raise ValueError("cannot factor 0")
    default_trial, default_max = _factor_budget()
    trial_limit = trial_limit or default_trial
    factor_max = factor_max or default_max
    sign = -1 if n < 0 else 1
    m = abs(n)
    exponents: Dict[int, int] = {}
    m = _trial_divide(m, trial_limit, exponents)
    if m > 1:
        if m <= trial_limit * trial_limit:
            # no factor below sqrt(m): prime
            exponents[m] = exponents.get(m, 0) + 1
        else:
            logger.debug("Cofactor %d survives trial division, switching to rho", m)
            _split_with_rho(m, exponents, factor_max)
    return sign, Factorization.from_dict(exponents)


##############################################################################
# Valuations and orders
##############################################################################

def valuation(n: int, ell: int) -> int:
    if n < 1:
        raise ValueError(f"valuation needs a positive integer, got {n}")
    v = 0
    while n % ell == 0:
        n //= ell
        v += 1
    return v


def order_from_multiple(is_identity_at, multiple: int, factors: Factorization) -> int:
    """
    Factor descent: start from a known multiple of the order and strip each
    prime while the element stays trivial. `is_identity_at(k)` tests k*g == 0.
    """
    order = multiple
    for q, _ in factors.prime_powers:
        while order % q == 0 and is_identity_at(order // q):
            order //= q
    return order


def multiplicative_order(x: int, ctx: PrimeContext) -> int:
    p = ctx.p
    x %= p
    if x == 0:
        raise NotAUnitError(f"{x} is not a unit modulo {p}")
    return order_from_multiple(lambda k: pow(x, k, p) == 1, p - 1, ctx.p_minus_1)


def order_valuation(x: int, ctx: PrimeContext, ell: int) -> int:
    """v_ell of the order of x mod p without factoring p-1."""
    p = ctx.p
    x %= p
    if x == 0:
        raise NotAUnitError(f"{x} is not a unit modulo {p}")
    m = p - 1
    e = 0
    while m % ell == 0:
        m //= ell
        e += 1
    y = pow(x, m, p)
    v = 0
    while y != 1:
        y = pow(y, ell, p)
        v += 1
    return v


def squarefree_part(sign: int, *factorizations: Factorization) -> int:
    """Signed squarefree kernel of sign * prod(factorizations) (a denominator may be passed as a factor)."""
    out = sign
    for fac in factorizations:
        for q, e in fac.prime_powers:
            if e % 2:
                out *= q
    return out
