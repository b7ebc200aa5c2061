import unittest
from unittest.mock import patch

import numpy as np

from src.slope_newt.models.errors import NumericalError, ValidationError
from src.slope_newt.models.problem import LambdaSeq, ProblemData, oscar_weights, oscar_weights_from_factor
from src.slope_newt.prox.jacobian import LinearSolveResult, Strategy
from src.slope_newt.simulation.synthetic import synth_instance
from src.slope_newt.solvers.ssn import SsnConfig, ToleranceSpec, grad_psi, psi_value, ssn_solve


class TestPsi(unittest.TestCase):
    def setUp(self):
        self.p = ProblemData(np.eye(2), [3.0, 3.0])
        self.lam = LambdaSeq([2.0, 1.0])

    def test_origin(self):
        self.assertEqual(psi_value(np.zeros(2), np.zeros(2), 1.0, self.p, self.lam), 0.0)

    def test_example(self):
        y = np.array([-1.5, -1.5])
        self.assertAlmostEqual(psi_value(y, np.zeros(2), 1.0, self.p, self.lam), -6.75)

    def test_gradient_vanishes_for_zero_data(self):
        p = ProblemData(np.eye(2), [0.0, 0.0])
        grad, prox = grad_psi(np.zeros(2), np.zeros(2), 1.0, p, self.lam)
        np.testing.assert_array_equal(grad, [0.0, 0.0])
        np.testing.assert_array_equal(prox.x, [0.0, 0.0])

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        m, n = 6, 9
        p = ProblemData(rng.normal(size=(m, n)), rng.normal(size=m))
        lam = LambdaSeq(np.sort(rng.uniform(0.1, 1.0, n))[::-1])
        h = 1e-6
        for _ in range(10):
            y, x_k = rng.normal(size=m), rng.normal(size=n)
            sigma = float(rng.uniform(0.5, 3.0))
            grad, _ = grad_psi(y, x_k, sigma, p, lam)
            fd = np.array([
                (psi_value(y + h * e, x_k, sigma, p, lam) - psi_value(y - h * e, x_k, sigma, p, lam)) / (2 * h)
                for e in np.eye(m)])
            np.testing.assert_allclose(grad, fd, atol=1e-5)

    def test_argument_checks(self):
        with self.assertRaises(ValidationError):
            psi_value(np.zeros(3), np.zeros(2), 1.0, self.p, self.lam)
        with self.assertRaises(ValidationError):
            grad_psi(np.zeros(2), np.zeros(2), 0.0, self.p, self.lam)


class TestSsnSolve(unittest.TestCase):
    def setUp(self):
        self.p = ProblemData(np.eye(2), [3.0, 3.0])
        self.lam = LambdaSeq([2.0, 1.0])
        self.cfg = SsnConfig()
        self.stop = ToleranceSpec.fixed(1e-10)

    def test_subproblem_from_origin(self):
        state = ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, self.cfg, self.p, self.lam)
        np.testing.assert_allclose(state.y, [-2.25, -2.25], atol=1e-10)
        self.assertLessEqual(state.grad_norm, 1e-10)
        self.assertLessEqual(state.newton_iters, 5)
        self.assertFalse(state.stagnated)
        np.testing.assert_allclose(state.prox_cache.x, [0.75, 0.75])

    def test_converges_to_dual_optimum_at_optimal_multiplier(self):
        x_opt = np.array([1.5, 1.5])
        state = ssn_solve(x_opt, 1.0, np.zeros(2), self.stop, self.cfg, self.p, self.lam)
        np.testing.assert_allclose(state.y, [-1.5, -1.5], atol=1e-10)
        self.assertLessEqual(state.newton_iters, 5)

    def test_already_optimal(self):
        state = ssn_solve(np.array([1.5, 1.5]), 1.0, np.array([-1.5, -1.5]), self.stop, self.cfg, self.p, self.lam)
        self.assertEqual(state.newton_iters, 0)
        self.assertEqual(state.grad_norms, [0.0])

    def test_psi_does_not_increase(self):
        rng = np.random.default_rng(40)
        p = ProblemData(rng.normal(size=(15, 25)), rng.normal(size=15))
        lam = LambdaSeq(np.linspace(1.0, 0.1, 25))
        x_k = rng.normal(size=25)
        y0 = rng.normal(size=15)
        state = ssn_solve(x_k, 2.0, y0, self.stop, self.cfg, p, lam)
        self.assertLessEqual(state.psi, psi_value(y0, x_k, 2.0, p, lam))
        self.assertLessEqual(state.grad_norm, 1e-10)
        self.assertEqual(len(state.grad_norms), state.newton_iters + 1)

    def test_forced_strategies_agree(self):
        rng = np.random.default_rng(41)
        p = ProblemData(rng.normal(size=(20, 30)), rng.normal(size=20))
        lam = LambdaSeq(np.linspace(2.0, 0.5, 30))
        x_k = rng.normal(size=30)
        results = [ssn_solve(x_k, 1.0, np.zeros(20), self.stop, SsnConfig(strategy=s), p, lam).y for s in Strategy]
        for y in results[1:]:
            np.testing.assert_allclose(y, results[0], atol=1e-8)

    def test_steepest_descent_fallback(self):
        def ascent(op, rhs, cg_tol, cg_maxit=500):
            return LinearSolveResult(-rhs, 0.0, 1, True)

        with patch("src.slope_newt.solvers.ssn.solve_newton_system", side_effect=ascent) as solve:
            with self.assertLogs("slope_newt", level="WARNING") as logs:
                state = ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, self.cfg, self.p, self.lam)
        self.assertTrue(solve.called)
        self.assertTrue(any("steepest-descent" in line for line in logs.output))
        np.testing.assert_allclose(state.y, [-2.25, -2.25], atol=1e-10)

    def test_line_search_exhaustion_sets_stagnated(self):
        def tiny(op, rhs, cg_tol, cg_maxit=500):
            return LinearSolveResult(1e6 * rhs, 0.0, 1, True)

        cfg = SsnConfig(max_linesearch=2)
        with patch("src.slope_newt.solvers.ssn.solve_newton_system", side_effect=tiny):
            state = ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, cfg, self.p, self.lam)
        self.assertTrue(state.stagnated)
        self.assertEqual(state.newton_iters, 0)
        np.testing.assert_array_equal(state.y, [0.0, 0.0])

    def test_iteration_cap(self):
        state = ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, SsnConfig(max_newton_iters=1), self.p, self.lam)
        self.assertEqual(state.newton_iters, 1)
        self.assertGreater(state.grad_norm, 1e-10)

    def test_non_finite_gradient(self):
        with patch.object(ProblemData, "matvec", return_value=np.full(2, np.nan)):
            with self.assertRaises(NumericalError) as ctx:
                ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, self.cfg, self.p, self.lam)
        self.assertEqual(ctx.exception.state["newton_iter"], 0)

    def test_config_validation(self):
        with self.assertRaises(ValidationError):
            SsnConfig(mu=0.5)
        with self.assertRaises(ValidationError):
            SsnConfig(backtrack=1.0)

    def test_inexact_linear_solves_are_counted(self):
        def loose(op, rhs, cg_tol, cg_maxit=500):
            return LinearSolveResult(rhs, 1.0, cg_maxit, False)

        with patch("src.slope_newt.solvers.ssn.solve_newton_system", side_effect=loose):
            state = ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, self.cfg, self.p, self.lam)
        self.assertEqual(state.inexact_solves, state.newton_iters)
        self.assertGreater(state.inexact_solves, 0)
        self.assertTrue(state.converged)

    def test_converged_flag(self):
        state = ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, self.cfg, self.p, self.lam)
        self.assertTrue(state.converged)
        self.assertEqual(state.inexact_solves, 0)
        capped = ssn_solve(np.zeros(2), 1.0, np.zeros(2), self.stop, SsnConfig(max_newton_iters=1), self.p, self.lam)
        self.assertFalse(capped.converged)


class TestSsnProperties(unittest.TestCase):
    def setUp(self):
        self.p, _ = synth_instance(50, 200, 3, 0.1, seed=21)
        self.lam = oscar_weights(*oscar_weights_from_factor(1e-2, self.p), self.p.n)
        self.x_k = np.random.default_rng(22).normal(scale=0.1, size=self.p.n)
        self.stop = ToleranceSpec.fixed(1e-10)

    def test_gradient_is_strongly_monotone(self):
        rng = np.random.default_rng(23)
        for sigma in (0.1, 1.0, 10.0):
            for _ in range(20):
                u, v = rng.normal(size=self.p.m), rng.normal(size=self.p.m)
                gu, _ = grad_psi(u, self.x_k, sigma, self.p, self.lam)
                gv, _ = grad_psi(v, self.x_k, sigma, self.p, self.lam)
                gap = np.dot(gu - gv, u - v) - np.dot(u - v, u - v)
                self.assertGreaterEqual(gap, -1e-10 * np.dot(u - v, u - v))

    def test_fast_local_convergence(self):
        for sigma in (1.0, 10.0):
            with self.subTest(sigma=sigma):
                state = ssn_solve(self.x_k, sigma, np.zeros(self.p.m), self.stop, SsnConfig(), self.p, self.lam)
                self.assertTrue(state.converged)
                self.assertLessEqual(state.newton_iters, 30)
                self.assertLessEqual(state.grad_norms[-1], state.grad_norms[-2])

    def test_minimizer_does_not_depend_on_start(self):
        rng = np.random.default_rng(24)
        first = ssn_solve(self.x_k, 3.0, np.zeros(self.p.m), self.stop, SsnConfig(), self.p, self.lam)
        second = ssn_solve(self.x_k, 3.0, rng.normal(scale=5.0, size=self.p.m), self.stop, SsnConfig(),
                           self.p, self.lam)
        self.assertTrue(first.converged and second.converged)
        np.testing.assert_allclose(first.y, second.y, rtol=0.0, atol=1e-8)


if __name__ == "__main__":
    unittest.main()
