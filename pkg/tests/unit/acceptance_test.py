import unittest

import numpy as np

from src.slope_newt.experiments.path import PathGrid, run_path
from src.slope_newt.models.problem import (LambdaSeq, ProblemData, lambda_max, oscar_weights,
                                           oscar_weights_from_factor)
from src.slope_newt.prox.jacobian import (BlockPartition, Strategy, active_partition, assemble_newton_operator,
                                          dense_projector, jacobian_factors, m_matvec, solve_newton_system)
from src.slope_newt.prox.sorted_prox import prox_sorted_l1, signed_sort
from src.slope_newt.simulation.synthetic import synth_instance
from src.slope_newt.solvers import AdmmConfig, AlmConfig, ApgConfig, admm_solve, alm_solve, apg_solve
from src.slope_newt.utils.config import long_tests_enabled

LONG = unittest.skipUnless(long_tests_enabled(), "set SLOPE_NEWT_LONG_TESTS=1 for full-size runs")


def _oscar(p, a):
    return oscar_weights(*oscar_weights_from_factor(a, p), p.n)


class TestProjectorStructure(unittest.TestCase):
    def test_factored_projector(self):
        rng = np.random.default_rng(100)
        for _ in range(200):
            n = int(rng.integers(1, 51))
            part = BlockPartition.from_gamma(rng.random(n) < rng.uniform(0.1, 0.9))
            P = jacobian_factors(part, signed_sort(rng.normal(size=n))).sorted_projector()
            np.testing.assert_allclose(P, dense_projector(part), atol=1e-12)
            np.testing.assert_allclose(P, P.T, atol=0.0)
            np.testing.assert_allclose(P @ P, P, atol=1e-10)

    def test_zero_order_expansion(self):
        rng = np.random.default_rng(101)
        for _ in range(100):
            n = int(rng.integers(2, 30))
            lam = LambdaSeq(np.sort(rng.uniform(0.1, 2.0, n))[::-1])
            y, u = rng.normal(scale=2.0, size=n), rng.normal(size=n)
            base = prox_sorted_l1(y, lam).x
            t, error = 1.0, np.inf
            for _ in range(60):
                shifted = prox_sorted_l1(y + t * u, lam)
                M = jacobian_factors(active_partition(shifted), shifted.pi)
                error = np.linalg.norm(shifted.x - base - m_matvec(M, t * u))
                if error <= 1e-10:
                    break
                t *= 0.5
            self.assertLessEqual(error, 1e-10)


class TestLinearStrategies(unittest.TestCase):
    def test_strategies_agree(self):
        rng = np.random.default_rng(102)
        for _ in range(50):
            m = int(rng.integers(5, 201))
            n = int(rng.integers(5, 150))
            p = ProblemData(rng.normal(size=(m, n)) / np.sqrt(m), np.zeros(m))
            lam = LambdaSeq(np.sort(rng.uniform(0.05, 1.0, n))[::-1])
            prox = prox_sorted_l1(rng.normal(size=n), lam)
            f = jacobian_factors(active_partition(prox), prox.pi)
            sigma = float(rng.uniform(0.5, 10.0))
            rhs = rng.normal(size=m)
            d = {s: solve_newton_system(assemble_newton_operator(p, f, sigma, s), rhs, 1e-12, 2000).d
                 for s in Strategy}
            np.testing.assert_allclose(d[Strategy.SMW], d[Strategy.DENSE_CHOLESKY], atol=1e-8)
            np.testing.assert_allclose(d[Strategy.PCG], d[Strategy.DENSE_CHOLESKY], atol=1e-8)


class TestFixedInstance(unittest.TestCase):
    def test_all_solvers(self):
        p = ProblemData(np.eye(2), [3.0, 3.0])
        lam = LambdaSeq([2.0, 1.0])
        reports = [alm_solve(p, lam, AlmConfig(tol_G=1e-12, tol_D=1e-12)),
                   admm_solve(p, lam, AdmmConfig(tol_G=1e-12, tol_D=1e-12)),
                   apg_solve(p, lam, ApgConfig(tol_G=1e-12, tol_D=1e-12))]
        for report in reports:
            with self.subTest(algorithm=report.algorithm.value):
                self.assertTrue(report.converged)
                self.assertAlmostEqual(report.obj_primal, 6.75, delta=1e-9)
                self.assertAlmostEqual(report.obj_dual, 6.75, delta=1e-9)
                np.testing.assert_allclose(report.x, [1.5, 1.5], atol=1e-6)
                np.testing.assert_allclose(report.y, [-1.5, -1.5], atol=1e-6)


class TestCrossSolver(unittest.TestCase):
    def _check(self, p, lam):
        alm = alm_solve(p, lam)
        admm = admm_solve(p, lam)
        apg = apg_solve(p, lam)
        for report in (alm, admm, apg):
            self.assertTrue(report.converged, report.algorithm.value)
            self.assertLessEqual(report.eta_G, 1e-6)
            self.assertLessEqual(report.eta_D, 1e-6)
        scale = max(1.0, abs(alm.obj_primal))
        self.assertAlmostEqual(admm.obj_primal, alm.obj_primal, delta=1e-5 * scale)
        self.assertAlmostEqual(apg.obj_primal, alm.obj_primal, delta=1e-5 * scale)
        self.assertLessEqual(alm.outer_iters, 100)
        self.assertLessEqual(alm.linear_solve_iters, 2000)
        self.assertLessEqual(alm.eta_kkt, 1e-5)

    def test_small_instances(self):
        for seed in range(2):
            p, _ = synth_instance(40, 150, 3, 0.1, seed=seed)
            for a in (1e-2, 1e-3):
                with self.subTest(seed=seed, a=a):
                    self._check(p, _oscar(p, a))

    @LONG
    def test_desk_scale_instances(self):
        for seed in range(20):
            p, _ = synth_instance(200, 2000, 3, 0.1, seed=seed)
            for a in (1e-3, 1e-4):
                with self.subTest(seed=seed, a=a):
                    self._check(p, _oscar(p, a))


class TestGrouping(unittest.TestCase):
    def test_equal_groups_are_recovered_as_blocks(self):
        p, _ = synth_instance(200, 50, 2, 0.0, seed=3)
        w1 = 1e-2 * lambda_max(p)
        report = alm_solve(p, oscar_weights(w1, 50.0 * w1 / p.n, p.n))
        self.assertTrue(report.converged)
        self.assertGreater(report.nnz999, 0)
        top = np.sort(np.abs(report.x))[::-1][:report.nnz999]
        blocks = 1 + int(np.sum(np.abs(np.diff(top)) > 1e-5 * top[0]))
        self.assertLessEqual(blocks, 4)


class TestPathProtocol(unittest.TestCase):
    def _sweep(self, p, spec, count):
        grid = PathGrid.from_spec(p, spec, "fixed:auto")
        self.assertEqual(grid.w1_values.size, count)
        warm = run_path(p, grid)
        cold = run_path(p, PathGrid(grid.w1_values, grid.w2_rule, grid.w2_values, warm_start=False))
        self.assertTrue(all(pt.report.converged for pt in warm))
        self.assertTrue(all(pt.report.converged for pt in cold))
        self.assertLessEqual(sum(pt.report.inner_iters_total for pt in warm),
                             sum(pt.report.inner_iters_total for pt in cold))

    def test_short_sweep(self):
        p, _ = synth_instance(40, 300, 3, 0.1, seed=11)
        self._sweep(p, "0.01:0.5:10", 10)

    @LONG
    def test_full_sweep(self):
        p, _ = synth_instance(120, 3000, 3, 0.1, seed=12)
        self._sweep(p, "0.001:1:100", 100)


if __name__ == "__main__":
    unittest.main()
