import math
import random
import unittest
from fractions import Fraction

from src.arith import PrimeContext, factorize, multiplicative_order, sieve_primes, valuation
from src.errors import (
    ConfigurationError,
    ExclusionError,
    ExclusionReason,
    PointNotOnCurveError,
    TorsionCollisionError,
)
from src.groups import (
    CurvePointQ,
    CurveTorsion,
    FactoredRational,
    ReducedTorusPoint,
    TorusPoint,
    TorusTorsionClass,
    WeierstrassCurve,
    _count_points_exhaustive,
    check_torsion_list,
    curve_discriminant,
    curve_group_order,
    curve_point_order,
    curve_reduce,
    l_primary_part,
    match_l_part,
    rational_multiple,
    rational_point_order,
    reduce_torus_point,
    torsion_order,
    torus_order_valuation,
    torus_point_order,
    tuple_order,
)

RANK_THREE = WeierstrassCurve(0, 0, 1, -7, 6)
FIVE_TORSION = WeierstrassCurve(0, -1, 1, -10, -20)


class TestTorus(unittest.TestCase):
    def test_factored_rational(self):
        r = FactoredRational.from_fraction("-3/5")
        self.assertEqual(r.value, Fraction(-3, 5))
        self.assertEqual(r.support, (3, 5))
        self.assertEqual(r.exponent(5), -1)
        self.assertEqual(r.residue(7), 5)
        self.assertEqual(r.power(2).value, Fraction(9, 25))

    def test_residue_exclusions(self):
        r = FactoredRational.from_fraction("-3/5")
        with self.assertRaises(ExclusionError) as cm:
            r.residue(5)
        self.assertEqual(cm.exception.reason, ExclusionReason.DENOMINATOR)
        with self.assertRaises(ExclusionError) as cm:
            r.residue(3)
        self.assertEqual(cm.exception.reason, ExclusionReason.NUMERATOR)

    def test_zero_coordinate_rejected(self):
        with self.assertRaises(ConfigurationError):
            FactoredRational.from_fraction(0)

    def test_order_valuation_of_two(self):
        two = TorusPoint((FactoredRational.from_fraction(2),))
        values = [torus_order_valuation(two, PrimeContext(p), 2) for p in (3, 5, 7, 11, 13, 17, 19)]
        self.assertEqual(values, [1, 2, 0, 1, 2, 3, 1])
        with self.assertRaises(ExclusionError) as cm:
            torus_order_valuation(two, PrimeContext(2), 2)
        self.assertEqual(cm.exception.reason, ExclusionReason.STUDIED_PRIME)

    def test_point_order_is_lcm_of_coordinates(self):
        R = TorusPoint(tuple(FactoredRational.from_fraction(c) for c in (2, -3)))
        for p in sieve_primes(300)[3:]:
            ctx = PrimeContext(int(p))
            expected = math.lcm(multiplicative_order(2, ctx), multiplicative_order(-3 % ctx.p, ctx))
            self.assertEqual(torus_point_order(reduce_torus_point(R, ctx), ctx), expected, p)

    def test_tuple_order_is_lcm(self):
        R = TorusPoint((FactoredRational.from_fraction(2), FactoredRational.from_fraction(3)))
        for p in sieve_primes(300)[2:]:
            ctx = PrimeContext(p)
            g = reduce_torus_point(R, ctx)
            expected = math.lcm(multiplicative_order(2, ctx), multiplicative_order(3, ctx))
            self.assertEqual(tuple_order(g, p - 1, ctx.p_minus_1), expected)

    def test_l_primary_part_in_cyclic_groups(self):
        """The l-part has l-power order and leaves a quotient of order prime to l."""
        rng = random.Random(3)
        for p in sieve_primes(200)[1:]:
            ctx = PrimeContext(p)
            for _ in range(5):
                x = rng.randrange(1, p)
                g = ReducedTorusPoint(p, (x,))
                order = multiplicative_order(x, ctx)
                for ell in (2, 3, 5):
                    part = l_primary_part(g, order, ell)
                    t = part.component.residues[0]
                    self.assertEqual(part.a, valuation(order, ell))
                    self.assertEqual(multiplicative_order(t, ctx), ell ** part.a)
                    rest = x * pow(t, -1, p) % p
                    self.assertEqual(valuation(multiplicative_order(rest, ctx), ell), 0)
                    # exhaustive: the only element with both properties
                    candidates = [y for y in range(1, p)
                                  if multiplicative_order(y, ctx) == ell ** valuation(multiplicative_order(y, ctx), ell)
                                  and valuation(multiplicative_order(x * pow(y, -1, p) % p, ctx), ell) == 0]
                    self.assertEqual(candidates, [t])

    def test_match_minus_one(self):
        minus_one = TorusPoint((FactoredRational.from_fraction(-1),))
        g = reduce_torus_point(minus_one, PrimeContext(13))
        part = l_primary_part(g, 2, 2)
        torsion = [TorusTorsionClass((1,)), TorusTorsionClass((2,))]
        self.assertEqual(match_l_part(part, torsion), 1)
        self.assertEqual(str(TorusTorsionClass((1, 2, 4))), "1 ; -1 ; mu(4)")


class TestCurves(unittest.TestCase):
    def test_discriminants(self):
        self.assertEqual(RANK_THREE.discriminant, 5077)
        self.assertEqual(FIVE_TORSION.discriminant, -161051)
        self.assertEqual(curve_discriminant(0, -1, 1, -10, -20), -161051)
        with self.assertRaises(ConfigurationError):
            WeierstrassCurve(0, 0, 0, 0, 0)

    def test_point_equation_check(self):
        CurvePointQ.on(RANK_THREE, 1, 0)
        CurvePointQ.on(RANK_THREE, 0, 2)
        with self.assertRaises(PointNotOnCurveError):
            CurvePointQ.on(RANK_THREE, 1, 1)

    def test_rational_orders(self):
        P = CurvePointQ.on(FIVE_TORSION, 5, 5)
        self.assertEqual(rational_point_order(FIVE_TORSION, P), 5)
        self.assertTrue(rational_multiple(FIVE_TORSION, 5, P).is_infinity)
        self.assertIsNone(rational_point_order(RANK_THREE, CurvePointQ.on(RANK_THREE, 1, 0)))
        self.assertEqual(torsion_order(FIVE_TORSION, [P, CurvePointQ.infinity()]), 5)
        with self.assertRaises(ConfigurationError):
            torsion_order(RANK_THREE, [CurvePointQ.on(RANK_THREE, 1, 0)])

    def test_small_point_counts(self):
        self.assertEqual(_count_points_exhaustive(RANK_THREE, 2), 5)
        self.assertEqual(_count_points_exhaustive(RANK_THREE, 3), 7)
        self.assertEqual(_count_points_exhaustive(FIVE_TORSION, 2), 5)
        self.assertEqual(_count_points_exhaustive(FIVE_TORSION, 3), 5)
        self.assertEqual(_count_points_exhaustive(FIVE_TORSION, 7), 10)

    def test_bsgs_matches_exhaustive_count(self):
        rng = random.Random(11)
        curves = []
        while len(curves) < 20:
            coefficients = [rng.randint(-5, 5) for _ in range(5)]
            try:
                curves.append(WeierstrassCurve(*coefficients))
            except ConfigurationError:
                continue
        for curve in curves:
            for p in sieve_primes(499):
                if curve.discriminant % p == 0:
                    continue
                ctx = PrimeContext(p)
                self.assertEqual(curve_group_order(curve, ctx, seed=1, exhaustive_below=0),
                                 _count_points_exhaustive(curve, p), (curve.coefficients, p))

    def test_bad_reduction_excluded(self):
        with self.assertRaises(ExclusionError) as cm:
            curve_group_order(FIVE_TORSION, PrimeContext(11))
        self.assertEqual(cm.exception.reason, ExclusionReason.BAD_REDUCTION)

    def test_denominator_excluded(self):
        curve = WeierstrassCurve(0, 0, 0, -2, 0)
        # 2P for P = (-1, 1) has x = 9/4
        P = CurvePointQ.on(curve, -1, 1)
        Q = rational_multiple(curve, 2, P)
        self.assertEqual(Q.x, Fraction(9, 4))
        with self.assertRaises(ExclusionError) as cm:
            curve_reduce(curve, Q, PrimeContext(2))
        self.assertEqual(cm.exception.reason, ExclusionReason.BAD_REDUCTION)
        with self.assertRaises(ExclusionError) as cm:
            curve_reduce(WeierstrassCurve(0, 0, 1, -2, 0), CurvePointQ(Fraction(1, 3), Fraction(1)), PrimeContext(3))
        self.assertEqual(cm.exception.reason, ExclusionReason.DENOMINATOR)

    def test_torsion_point_keeps_its_order(self):
        P = CurvePointQ.on(FIVE_TORSION, 5, 5)
        for p in sieve_primes(2000):
            if p in (5, 11):
                continue
            ctx = PrimeContext(p)
            N = curve_group_order(FIVE_TORSION, ctx)
            self.assertEqual(N % 5, 0)
            g = curve_reduce(FIVE_TORSION, (P,), ctx)
            self.assertEqual(tuple_order(g, N, factorize(N)[1]), 5, p)
            self.assertEqual(curve_point_order(g, N, factorize(N)[1]), 5, p)

    def test_match_curve_l_part(self):
        P = CurvePointQ.on(FIVE_TORSION, 5, 5)
        minus_P = CurvePointQ.on(FIVE_TORSION, 5, -6)
        torsion = [CurveTorsion((P,), 5)]
        ctx = PrimeContext(13)
        N = curve_group_order(FIVE_TORSION, ctx)
        for R, expected in ((P, 0), (minus_P, None)):
            g = curve_reduce(FIVE_TORSION, (R,), ctx)
            part = l_primary_part(g, tuple_order(g, N, factorize(N)[1]), 5)
            self.assertEqual(match_l_part(part, torsion), expected)

        g = curve_reduce(FIVE_TORSION, (P,), PrimeContext(5))
        with self.assertRaises(ExclusionError) as cm:
            match_l_part(l_primary_part(g, 5, 5), torsion)
        self.assertEqual(cm.exception.reason, ExclusionReason.TORSION_ORDER)

    def test_repeated_torsion_rejected(self):
        P = CurvePointQ.on(FIVE_TORSION, 5, 5)
        with self.assertRaises(TorsionCollisionError):
            check_torsion_list([CurveTorsion((P,), 5), CurveTorsion((P,), 5)])


if __name__ == '__main__':
    unittest.main()
