import unittest
from unittest.mock import patch

import numpy as np

from fellerlab.numerics import ConfigError, Grid, GridError, LimitParams, NumericalCheckError
from fellerlab.numerics.closedform import k_star, l_star
from fellerlab.numerics.evolution import GeneratorKind, discretize
from fellerlab.numerics.kernel import box_kernel
from fellerlab.numerics.resolvent import (
    check_domain,
    lambda_to_zero_limit,
    resolvent_dense,
    resolvent_eps,
    resolvent_identity_gap,
    resolvent_limit,
)


def cosine(grid: Grid):
    return grid.sample(np.cos)


class LimitResolventTests(unittest.TestCase):
    def setUp(self) -> None:
        self.h = 1e-3
        self.grid = Grid(-1.0, 1.0, self.h)
        self.p = LimitParams(-1.0, 1.0, 1.0, 1.0)

    def test_solution_lies_in_the_domain(self) -> None:
        result = resolvent_limit(cosine(self.grid), self.p)
        self.assertLessEqual(result.boundary_report.worst(), 50.0 * self.h)
        self.assertLessEqual(result.residual_sup, 1e-3)

    def test_endpoint_values(self) -> None:
        g = cosine(self.grid)
        f = resolvent_limit(g, self.p).f
        self.assertAlmostEqual(f.at_a, g.at_a / self.p.lam, places=12)
        self.assertAlmostEqual(f.at_b, g.at_b / self.p.lam, places=12)

    def test_matches_discretised_generator(self) -> None:
        g = cosine(self.grid)
        exact = resolvent_limit(g, self.p).f
        M = discretize(GeneratorKind.A_LIMIT, self.grid, gamma=self.p.gamma)
        dense = resolvent_dense(M, g, self.p.lam)
        self.assertLessEqual((dense - exact).sup_norm(), 1e-2)

    def test_resolvent_identity(self) -> None:
        gap = resolvent_identity_gap(cosine(self.grid), self.p, 1.0, 2.0)
        self.assertLessEqual(gap, 1e-4)

    def test_lambda_to_zero(self) -> None:
        study = lambda_to_zero_limit(cosine(self.grid), self.p)
        self.assertEqual(study.lambdas, (1.0, 0.1, 0.01, 0.001))
        self.assertLess(study.sup_errors[-1], study.sup_errors[0])
        self.assertLessEqual(study.sup_errors[-1], 0.01)

    def test_lambda_to_zero_needs_decreasing_lambdas(self) -> None:
        with self.assertRaises(ConfigError):
            lambda_to_zero_limit(cosine(self.grid), self.p, (0.1, 1.0))

    def test_requires_lambda(self) -> None:
        with self.assertRaises(ConfigError):
            resolvent_limit(cosine(self.grid), LimitParams(-1.0, 1.0, 1.0))

    def test_positive_and_lambda_contractive(self) -> None:
        g = self.grid.sample(lambda x: 1.0 + x**2)
        for lam in (0.1, 1.0, 10.0):
            f = resolvent_limit(g, self.p.with_lambda(lam)).f
            self.assertGreaterEqual(float(np.min(f.values)), 0.0)
            self.assertLessEqual(lam * f.sup_norm(), g.sup_norm() + 1e-9)

    def test_residual_tolerance_is_enforced(self) -> None:
        g = cosine(self.grid)
        result = resolvent_limit(g, self.p, residual_tol=1e-3)
        self.assertLessEqual(result.residual_sup, 1e-3)
        with self.assertRaises(NumericalCheckError):
            resolvent_limit(g, self.p, residual_tol=1e-30)

    def test_large_residual_is_logged(self) -> None:
        with patch("fellerlab.numerics.resolvent.RESIDUAL_WARN_FACTOR", 0.0):
            with self.assertLogs("fellerlab.numerics.resolvent", level="WARNING") as logs:
                resolvent_limit(cosine(self.grid), self.p)
        self.assertIn("resolvent residual", logs.output[0])


class DomainCheckTests(unittest.TestCase):
    def test_capture_probabilities_satisfy_the_domain_conditions(self) -> None:
        grid = Grid(-1.0, 2.0, 0.01)
        p = LimitParams(-1.0, 2.0, 0.5)
        for values in (k_star(grid.x, p), l_star(grid.x, p)):
            report = check_domain(grid.function(np.asarray(values)), p.gamma)
            self.assertLessEqual(report.worst(), 1e-9)

    def test_too_few_nodes(self) -> None:
        with self.assertRaises(GridError):
            check_domain(Grid(-0.02, 0.02, 0.01).zeros(), 1.0)


class EpsilonResolventTests(unittest.TestCase):
    def test_converges_to_limit_resolvent(self) -> None:
        grid = Grid(-1.0, 1.0, 1e-3)
        g = cosine(grid)
        base = box_kernel(height=0.5)
        limit = resolvent_limit(g, LimitParams(-1.0, 1.0, base.mass_gamma, 1.0)).f
        errors = [(resolvent_eps(g, 1.0, base.scaled(eps)).f - limit).sup_norm() for eps in (0.2, 0.1, 0.05)]
        self.assertTrue(all(nxt < prev for prev, nxt in zip(errors, errors[1:])), errors)
        self.assertLessEqual(errors[-1], 0.5 * errors[0])

    def test_equation_residual_is_small(self) -> None:
        grid = Grid(-1.0, 1.0, 1e-3)
        result = resolvent_eps(cosine(grid), 1.0, box_kernel(height=0.5).scaled(0.1))
        self.assertLessEqual(result.residual_sup, 1e-3)

    def test_positive_and_lambda_contractive(self) -> None:
        grid = Grid(-1.0, 1.0, 1e-3)
        g = grid.sample(lambda x: 2.0 - x)
        for lam in (0.5, 2.0):
            f = resolvent_eps(g, lam, box_kernel().scaled(0.1), residual_tol=1e-2).f
            self.assertGreaterEqual(float(np.min(f.values)), 0.0)
            self.assertLessEqual(lam * f.sup_norm(), g.sup_norm() + 1e-9)


if __name__ == "__main__":  # pragma: no cover
    unittest.main()
