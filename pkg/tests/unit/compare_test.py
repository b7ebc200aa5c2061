import unittest

import numpy as np

from src.slope_newt.experiments.compare import ComparisonRow, compare_solvers, performance_profile
from src.slope_newt.models.errors import ValidationError
from src.slope_newt.models.problem import ProblemData
from src.slope_newt.models.report import Algorithm
from src.slope_newt.solvers import AdmmConfig, AlmConfig, ApgConfig


def _row(instance, algorithm, wall_ms, converged=True, factor=1e-3):
    return ComparisonRow(instance=instance, factor=factor, algorithm=algorithm, w1=1.0, w2=0.1,
                         converged=converged, obj_primal=1.0, eta_G=0.0, eta_D=0.0, eta_kkt=0.0, nnz999=1,
                         iterations=1, inner_iters=0, wall_ms=wall_ms)


class TestCompareSolvers(unittest.TestCase):
    def test_all_algorithms_agree(self):
        p = ProblemData(np.eye(2), [3.0, 3.0])
        algorithms = [Algorithm.NEWT_ALM, Algorithm.ADMM, Algorithm.APG]
        configs = {Algorithm.NEWT_ALM: AlmConfig(tol_G=1e-9, tol_D=1e-9),
                   Algorithm.ADMM: AdmmConfig(tol_G=1e-9, tol_D=1e-9),
                   Algorithm.APG: ApgConfig(tol_G=1e-9, tol_D=1e-9)}
        rows = compare_solvers(p, [0.5, 0.1], algorithms, configs, "eye2")
        self.assertEqual(len(rows), 6)
        self.assertEqual([r.algorithm for r in rows[:3]], algorithms)
        self.assertEqual([r.factor for r in rows], [0.5] * 3 + [0.1] * 3)
        self.assertTrue(all(r.converged for r in rows))
        for group in (rows[:3], rows[3:]):
            objectives = [r.obj_primal for r in group]
            self.assertAlmostEqual(max(objectives), min(objectives), delta=1e-7 * max(objectives))
        self.assertAlmostEqual(rows[0].w1, 1.5)
        self.assertEqual(rows[0].instance, "eye2")

    def test_requires_work(self):
        p = ProblemData(np.eye(2), [3.0, 3.0])
        with self.assertRaises(ValidationError):
            compare_solvers(p, [], [Algorithm.APG])


class TestPerformanceProfile(unittest.TestCase):
    def test_fractions(self):
        rows = [_row("a", Algorithm.NEWT_ALM, 1.0), _row("a", Algorithm.ADMM, 2.0),
                _row("a", Algorithm.APG, 10.0, converged=False),
                _row("b", Algorithm.NEWT_ALM, 5.0, converged=False), _row("b", Algorithm.ADMM, 3.0),
                _row("b", Algorithm.APG, 12.0)]
        profile = {(a, tau): frac for a, tau, frac in performance_profile(rows, [1.0, 4.0])}
        self.assertEqual(profile[(Algorithm.NEWT_ALM, 1.0)], 0.5)
        self.assertEqual(profile[(Algorithm.ADMM, 1.0)], 0.5)
        self.assertEqual(profile[(Algorithm.ADMM, 4.0)], 1.0)
        self.assertEqual(profile[(Algorithm.APG, 1.0)], 0.0)
        self.assertEqual(profile[(Algorithm.APG, 4.0)], 0.5)

    def test_unsolved_problems_stay_in_denominator(self):
        rows = [_row("a", Algorithm.APG, 1.0), _row("b", Algorithm.APG, 1.0, converged=False)]
        self.assertEqual(performance_profile(rows, [1.0]), [(Algorithm.APG, 1.0, 0.5)])

    def test_factor_distinguishes_problems(self):
        rows = [_row("a", Algorithm.APG, 1.0, factor=1e-3), _row("a", Algorithm.APG, 1.0, factor=1e-4)]
        self.assertEqual(performance_profile(rows, [1.0]), [(Algorithm.APG, 1.0, 1.0)])

    def test_ratio_below_one(self):
        with self.assertRaises(ValidationError):
            performance_profile([], [0.5])


if __name__ == "__main__":
    unittest.main()
