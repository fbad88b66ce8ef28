import math
import unittest
from unittest.mock import patch

import numpy as np

from fellerlab.numerics import ConfigError, ContractionError, Grid, LimitParams, ResolutionError
from fellerlab.numerics.closedform import k_limit, l_limit
from fellerlab.numerics.kernel import box_kernel, gaussian_kernel
from fellerlab.numerics.picard import (
    Anchor,
    BieleckiNorm,
    apply_S,
    apply_T,
    apply_S_limit,
    apply_T_limit,
    bielecki_norm,
    choose_omega,
    measure_contraction,
    shooting_pair,
    solve_limit_pair,
    solve_pair,
)


class OmegaTests(unittest.TestCase):
    def test_factor_never_exceeds_three_eighths(self) -> None:
        for lam in (1e-3, 0.5, 1.0, 4.0, 100.0):
            for gamma in (0.0, 0.1, 1.0, 2.0, 50.0):
                omega, factor = choose_omega(lam, gamma)
                self.assertGreaterEqual(omega, 1.0)
                self.assertLessEqual(factor, 0.375 + 1e-15)

    def test_rejects_bad_arguments(self) -> None:
        with self.assertRaises(ConfigError):
            choose_omega(0.0, 1.0)
        with self.assertRaises(ConfigError):
            choose_omega(1.0, -1.0)

    def test_bielecki_weights(self) -> None:
        grid = Grid(-1.0, 1.0, 0.5)
        f = grid.function(np.ones(grid.size))
        self.assertEqual(bielecki_norm(f, BieleckiNorm(2.0, Anchor.LEFT)), 1.0)
        self.assertEqual(bielecki_norm(f, BieleckiNorm(2.0, Anchor.RIGHT)), 1.0)
        weights = BieleckiNorm(2.0, Anchor.LEFT).weights(grid)
        self.assertAlmostEqual(weights[-1], np.exp(-4.0))


class SolvePairTests(unittest.TestCase):
    def test_wronskian_is_constant(self) -> None:
        kernel = box_kernel(height=0.5).scaled(0.1)
        pair = solve_pair(kernel, 1.0, Grid(-1.0, 1.0, 1e-3))
        self.assertEqual(pair.k.at_a, 0.0)
        self.assertEqual(pair.l.at_b, 0.0)
        self.assertGreater(pair.wronskian, 0.0)
        self.assertLessEqual(pair.wronskian_variation(), 1e-4)
        self.assertLessEqual(pair.endpoint_mismatch(), 1e-4)
        self.assertIsNotNone(pair.trace_k)
        self.assertLess(pair.trace_k.iterations, 200)

    def test_eigenfunctions_are_positive_and_monotone(self) -> None:
        pair = solve_pair(box_kernel().scaled(0.1), 1.0, Grid(-1.0, 1.0, 1e-3))
        self.assertTrue(np.all(pair.k.values[1:] > 0.0))
        self.assertTrue(np.all(pair.l.values[:-1] > 0.0))
        self.assertTrue(np.all(np.diff(pair.k.values) > 0.0))
        self.assertTrue(np.all(np.diff(pair.l.values) < 0.0))
        profile = pair.wronskian_profile()
        self.assertLessEqual(float(np.ptp(profile)), 1e-4 * pair.wronskian)

    def test_increments_shrink_geometrically(self) -> None:
        pair = solve_pair(gaussian_kernel().scaled(0.1), 2.0, Grid(-1.0, 1.0, 1e-3))
        for trace in (pair.trace_k, pair.trace_l):
            ratios = trace.ratios(floor=1e-12)
            self.assertGreater(len(ratios), 3)
            self.assertLessEqual(trace.factor, 0.375)
            self.assertLessEqual(max(ratios), trace.factor + 1e-6)

    def test_solution_is_a_fixed_point(self) -> None:
        kernel = box_kernel().scaled(0.1)
        pair = solve_pair(kernel, 1.0, Grid(-1.0, 1.0, 1e-3))
        self.assertLessEqual((apply_T(pair.k, kernel, 1.0) - pair.k).sup_norm(), 1e-8)
        self.assertLessEqual((apply_S(pair.l, kernel, 1.0) - pair.l).sup_norm(), 1e-8)

    def test_coarse_grid_is_refined_internally(self) -> None:
        grid = Grid(-1.0, 1.0, 0.002)
        pair = solve_pair(box_kernel(height=0.5).scaled(0.01), 1.0, grid)
        self.assertEqual(pair.k.grid, grid)
        self.assertEqual(pair.k.values.size, grid.size)

    def test_matches_shooting_oracle_at_second_order(self) -> None:
        kernel = gaussian_kernel().scaled(0.1)
        errors = []
        for h in (1e-3, 5e-4):
            grid = Grid(-1.0, 1.0, h)
            pair = solve_pair(kernel, 1.0, grid)
            k_oracle, l_oracle = shooting_pair(kernel, 1.0, grid)
            errors.append(max((pair.k - k_oracle).sup_norm(), (pair.l - l_oracle).sup_norm()))
        self.assertLessEqual(errors[0], 5e-4)
        self.assertLessEqual(errors[1], errors[0] / 3.0)

    def test_oracle_restarts_at_box_jumps(self) -> None:
        # Piecewise constant q: k is sinh on [a, -0.1], then cosh/sinh through the box.
        lam, inner = 0.5, 10.0
        grid = Grid(-1.0, 1.0, 1e-3)
        k_oracle, l_oracle = shooting_pair(box_kernel().scaled(0.1), lam, grid)
        outer_rate, inner_rate = math.sqrt(2.0 * lam), math.sqrt(2.0 * (lam + inner))
        expected = []
        for x in grid.x:
            value, slope = math.sinh(outer_rate * (min(x, -0.1) + 1.0)) / outer_rate, math.cosh(outer_rate * 0.9)
            if x > -0.1:
                s = min(x, 0.1) + 0.1
                value, slope = (value * math.cosh(inner_rate * s) + slope / inner_rate * math.sinh(inner_rate * s),
                                value * inner_rate * math.sinh(inner_rate * s) + slope * math.cosh(inner_rate * s))
            if x > 0.1:
                s = x - 0.1
                value = value * math.cosh(outer_rate * s) + slope / outer_rate * math.sinh(outer_rate * s)
            expected.append(value)
        np.testing.assert_allclose(k_oracle.values, expected, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(l_oracle.values, expected[::-1], rtol=1e-9, atol=1e-12)

    def test_iteration_cap_raises(self) -> None:
        with patch("fellerlab.numerics.picard.ITERATION_CAP", 2):
            with self.assertRaises(ContractionError):
                solve_pair(box_kernel().scaled(0.1), 1.0, Grid(-1.0, 1.0, 0.01))

    def test_rejects_bad_tolerance_and_lambda(self) -> None:
        grid = Grid(-1.0, 1.0, 0.01)
        with self.assertRaises(ValueError):
            solve_pair(box_kernel().scaled(0.1), 1.0, grid, tol=1e-2)
        with self.assertRaises(ConfigError):
            solve_pair(box_kernel().scaled(0.1), -1.0, grid)

    def test_unresolved_kernel_in_operator(self) -> None:
        grid = Grid(-1.0, 1.0, 0.05)
        with self.assertRaises(ResolutionError):
            apply_T(grid.function(np.ones(grid.size)), box_kernel().scaled(0.1), 1.0)


class LimitPairTests(unittest.TestCase):
    def test_limit_pair_matches_closed_form(self) -> None:
        p = LimitParams(-1.0, 1.0, 1.0, 0.5)
        h = 1e-3
        grid = Grid(-1.0, 1.0, h)
        pair = solve_limit_pair(p, grid)
        self.assertLessEqual(float(np.max(np.abs(pair.k.values - k_limit(grid.x, p)))), 100.0 * h**2)
        self.assertLessEqual(float(np.max(np.abs(pair.l.values - l_limit(grid.x, p)))), 100.0 * h**2)
        self.assertLessEqual((apply_T_limit(pair.k, 0.5, 1.0) - pair.k).sup_norm(), 1e-8)
        self.assertLessEqual((apply_S_limit(pair.l, 0.5, 1.0) - pair.l).sup_norm(), 1e-8)


class ContractionTests(unittest.TestCase):
    def test_observed_ratio_within_bound(self) -> None:
        for kernel in (box_kernel(), gaussian_kernel()):
            scaled = kernel.scaled(0.1)
            _, factor = choose_omega(1.0, scaled.gamma)
            ratio = measure_contraction(scaled, 1.0, Grid(-1.0, 1.0, 1e-3), seed=3)
            self.assertGreater(ratio, 0.0)
            self.assertLessEqual(ratio, factor + 1e-6)

    def test_identical_inputs_give_zero(self) -> None:
        grid = Grid(-1.0, 1.0, 0.01)
        f = grid.function(np.ones(grid.size))
        self.assertEqual(measure_contraction(box_kernel().scaled(0.1), 1.0, grid, f, f), 0.0)


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
