import random
import unittest

from src.arith import (
    Factorization,
    PrimeContext,
    factorize,
    is_prime,
    multiplicative_order,
    order_from_multiple,
    order_valuation,
    segment_primes,
    sieve_primes,
    squarefree_part,
    valuation,
)
from src.config import get_settings
from src.errors import FactorizationBudgetError, NotAUnitError


def naive_order(x, p):
    x %= p
    k, y = 1, x
    while y != 1:
        y = y * x % p
        k += 1
    return k


def naive_primes(bound):
    return [n for n in range(2, bound + 1) if all(n % d for d in range(2, int(n ** 0.5) + 1))]


class TestPrimes(unittest.TestCase):
    def test_sieve_matches_trial_division(self):
        self.assertEqual(sieve_primes(2000), naive_primes(2000))

    def test_small_bounds(self):
        self.assertEqual(sieve_primes(1), [])
        self.assertEqual(sieve_primes(2), [2])
        self.assertEqual(sieve_primes(20), [2, 3, 5, 7, 11, 13, 17, 19])

    def test_segments_concatenate(self):
        """Any partition of the interval gives the same primes."""
        whole = segment_primes(2, 5000).tolist()
        cuts = [2, 17, 18, 1000, 1024, 4999, 5000]
        parts = []
        for lo, hi in zip(cuts, cuts[1:]):
            parts.extend(segment_primes(lo, hi).tolist())
        self.assertEqual(parts, whole)

    def test_segment_far_from_origin(self):
        lo = 10**9
        expected = [n for n in range(lo, lo + 200) if is_prime(n)]
        self.assertEqual(segment_primes(lo, lo + 200).tolist(), expected)

    def test_is_prime(self):
        self.assertFalse(is_prime(1))
        self.assertFalse(is_prime(4))
        self.assertTrue(is_prime(2))
        self.assertTrue(is_prime(1_000_003))


class TestFactorization(unittest.TestCase):
    def test_small_values(self):
        self.assertEqual(factorize(360), (1, Factorization(((2, 3), (3, 2), (5, 1)))))
        self.assertEqual(factorize(-12), (-1, Factorization(((2, 2), (3, 1)))))
        self.assertEqual(factorize(1), (1, Factorization()))

    def test_product_of_large_primes(self):
        p, q = 1_000_000_007, 998_244_353
        sign, fac = factorize(p * q * 4)
        self.assertEqual(sign, 1)
        self.assertEqual(fac.prime_powers, ((2, 2), (q, 1), (p, 1)))

    def test_budget(self):
        p, q = 1_000_000_007, 998_244_353
        with self.assertRaises(FactorizationBudgetError):
            factorize(p * q, trial_limit=1000, factor_max=10**12)

    def test_zero_rejected(self):
        with self.assertRaises(ValueError):
            factorize(0)

    def test_value_and_str(self):
        fac = factorize(2 * 2 * 7)[1]
        self.assertEqual(fac.value(), 28)
        self.assertEqual(str(fac), "2^2·7")
        self.assertEqual(fac.exponent(7), 1)
        self.assertEqual(fac.exponent(3), 0)

    def test_squarefree_part(self):
        self.assertEqual(squarefree_part(*factorize(12)), 3)
        self.assertEqual(squarefree_part(*factorize(-8)), -2)
        self.assertEqual(squarefree_part(*factorize(49)), 1)
        # -2/9 and -8 share a kernel
        self.assertEqual(squarefree_part(-1, factorize(2)[1], factorize(9)[1]), -2)


class TestOrders(unittest.TestCase):
    def test_examples(self):
        self.assertEqual(multiplicative_order(2, PrimeContext(7)), 3)
        self.assertEqual(multiplicative_order(3, PrimeContext(7)), 6)
        self.assertEqual(multiplicative_order(1, PrimeContext(2)), 1)
        self.assertEqual(valuation(48, 2), 4)
        self.assertEqual(valuation(7, 2), 0)

    def test_not_a_unit(self):
        with self.assertRaises(NotAUnitError):
            multiplicative_order(14, PrimeContext(7))
        with self.assertRaises(NotAUnitError):
            order_valuation(0, PrimeContext(5), 2)

    def test_against_naive_loop(self):
        rng = random.Random(7)
        bases = [rng.randrange(2, 10**6) for _ in range(50)]
        bound = 10**4 if get_settings().slow_tests else 1000
        for p in sieve_primes(bound):
            ctx = PrimeContext(p)
            for x in bases:
                if x % p == 0:
                    continue
                order = naive_order(x, p)
                self.assertEqual(multiplicative_order(x, ctx), order, (x, p))
                for ell in (2, 3, 5):
                    self.assertEqual(order_valuation(x, ctx, ell), valuation(order, ell), (x, p, ell))

    def test_order_from_multiple(self):
        # order of 5 in Z/12 under addition
        order = order_from_multiple(lambda k: (5 * k) % 12 == 0, 12, factorize(12)[1])
        self.assertEqual(order, 12)
        order = order_from_multiple(lambda k: (4 * k) % 12 == 0, 12, factorize(12)[1])
        self.assertEqual(order, 3)


if __name__ == '__main__':
    unittest.main()
