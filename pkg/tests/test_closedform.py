import math
import unittest

import numpy as np
from scipy.integrate import simpson

from fellerlab.numerics import ConfigError, LimitParams
from fellerlab.numerics.closedform import (
    MIN_LAMBDA,
    exp_law_mean,
    k1,
    k2,
    k_integral,
    k_limit,
    k_star,
    k_star_lambda0,
    l_limit,
    l_star,
    local_time_mean,
    occupation_window_mean,
    survival_affine,
    survival_expectation,
)

REFERENCE = LimitParams(-1.0, 1.0, 1.0, 0.5)


class ClosedFormConstantTests(unittest.TestCase):
    def test_reference_values(self) -> None:
        self.assertAlmostEqual(k_limit(1.0, REFERENCE), math.exp(2.0) - 1.0, delta=1e-9)
        self.assertAlmostEqual(l_limit(-1.0, REFERENCE), k_limit(1.0, REFERENCE), delta=1e-12)
        self.assertEqual(k_star(0.0, REFERENCE), 0.25)
        self.assertEqual(l_star(0.0, REFERENCE), 0.25)
        self.assertEqual(survival_expectation(0.0, REFERENCE), 0.5)
        self.assertEqual(survival_expectation(0.5, REFERENCE), 0.75)

    def test_exponential_law_mean(self) -> None:
        self.assertEqual(exp_law_mean(-1.0, 1.0), 1.0)
        self.assertAlmostEqual(exp_law_mean(-1.0, 2.0), 4.0 / 3.0, places=15)
        with self.assertRaises(ConfigError):
            exp_law_mean(1.0, 2.0)

    def test_survival_at_zero_is_laplace_transform_of_the_law(self) -> None:
        for a, b, gamma in ((-1.0, 1.0, 1.0), (-1.0, 2.0, 0.3), (-0.5, 3.0, 4.0)):
            p = LimitParams(a, b, gamma)
            expected = 1.0 / (1.0 + gamma * exp_law_mean(a, b))
            self.assertAlmostEqual(survival_expectation(0.0, p), expected, delta=1e-14)

    def test_local_time_mean_is_the_slope_of_survival_in_gamma(self) -> None:
        a, b, gamma = -1.0, 2.0, 1e-6
        x = np.linspace(a, b, 61)
        slope = (1.0 - survival_expectation(x, LimitParams(a, b, gamma))) / gamma
        np.testing.assert_allclose(local_time_mean(x, a, b), slope, atol=1e-5)
        self.assertEqual(local_time_mean(0.0, a, b), exp_law_mean(a, b))
        self.assertEqual(local_time_mean(b, a, b), 0.0)

    def test_occupation_window_mean(self) -> None:
        self.assertAlmostEqual(occupation_window_mean(-1.0, 1.0, 0.1), 0.95, places=15)
        with self.assertRaises(ConfigError):
            occupation_window_mean(-1.0, 1.0, 2.0)


class ClosedFormIdentityTests(unittest.TestCase):
    def setUp(self) -> None:
        self.p = LimitParams(-1.0, 2.0, 0.7, 1.3)
        self.x = np.linspace(self.p.a, self.p.b, 301)

    def test_affine_decomposition_matches_survival(self) -> None:
        np.testing.assert_allclose(survival_affine(self.x, self.p), survival_expectation(self.x, self.p),
                                   rtol=0.0, atol=1e-14)

    def test_capture_probabilities_sum_to_survival(self) -> None:
        total = np.asarray(k_star(self.x, self.p)) + np.asarray(l_star(self.x, self.p))
        np.testing.assert_allclose(total, survival_expectation(self.x, self.p), rtol=0.0, atol=1e-14)

    def test_capture_probabilities_at_the_ends(self) -> None:
        self.assertAlmostEqual(k_star(self.p.b, self.p), 1.0, places=14)
        self.assertEqual(k_star(self.p.a, self.p), 0.0)
        self.assertAlmostEqual(l_star(self.p.a, self.p), 1.0, places=14)
        self.assertEqual(l_star(self.p.b, self.p), 0.0)

    def test_eigenfunctions_vanish_at_their_anchor(self) -> None:
        self.assertEqual(k_limit(self.p.a, self.p), 0.0)
        self.assertEqual(l_limit(self.p.b, self.p), 0.0)

    def test_k_integral_matches_quadrature(self) -> None:
        x = np.linspace(-1.0, 1.0, 20001)
        numeric = simpson(np.asarray(k_limit(x, REFERENCE)), x=x)
        self.assertAlmostEqual(k_integral(REFERENCE), float(numeric), delta=1e-8)

    def test_small_lambda_limit(self) -> None:
        p = self.p.with_lambda(1e-6)
        np.testing.assert_allclose(k_limit(self.x, p), k_star_lambda0(self.x, p), rtol=1e-4, atol=1e-6)

    def test_lambda_floor(self) -> None:
        with self.assertRaises(ConfigError):
            k_limit(0.0, self.p.with_lambda(MIN_LAMBDA / 10.0))
        with self.assertRaises(ConfigError):
            l_limit(0.0, LimitParams(-1.0, 1.0, 1.0))


class BlockFunctionTests(unittest.TestCase):
    def test_k1_and_k2(self) -> None:
        self.assertEqual(k1(0.5, 2.0), 0.25)
        self.assertEqual(k2(2.0, 2.0, 3.0), 1.0)
        self.assertAlmostEqual(k2(0.0, 1.0, 1.0), 0.5)


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
