import unittest

import numpy as np

from src.slope_newt.models.errors import ValidationError
from src.slope_newt.models.problem import LambdaSeq, penalty_value
from src.slope_newt.prox.sorted_prox import (active_set_qp_oracle, dual_ball_violation, prox_conjugate_scaled,
                                             prox_scaled, prox_sorted_l1, signed_sort, sorted_solution, x_lambda)


def _random_lambda(rng, n, zero_tail=False):
    lam = np.sort(rng.uniform(0.0, 2.0, n))[::-1]
    if zero_tail:
        lam[rng.integers(1, n + 1):] = 0.0
    return LambdaSeq.relaxed(lam)


class TestSignedSort(unittest.TestCase):
    def test_mixed_signs(self):
        pi = signed_sort(np.array([-3.0, 1.0, 0.0]))
        np.testing.assert_array_equal(pi.perm, [0, 1, 2])
        np.testing.assert_array_equal(pi.signs, [-1.0, 1.0, 1.0])
        np.testing.assert_array_equal(pi.apply(np.array([-3.0, 1.0, 0.0])), [3.0, 1.0, 0.0])

    def test_identity(self):
        pi = signed_sort(np.array([5.0, 4.0, 4.0, 0.0]))
        np.testing.assert_array_equal(pi.perm, [0, 1, 2, 3])
        np.testing.assert_array_equal(pi.signs, np.ones(4))

    def test_ties_keep_index_order(self):
        pi = signed_sort(np.array([2.0, -2.0]))
        np.testing.assert_array_equal(pi.perm, [0, 1])
        np.testing.assert_array_equal(pi.signs, [1.0, -1.0])

    def test_inverse(self):
        rng = np.random.default_rng(7)
        y = rng.normal(size=9)
        pi = signed_sort(y)
        np.testing.assert_array_equal(pi.inverse(pi.apply(y)), y)
        self.assertTrue(np.all(np.diff(pi.apply(y)) <= 0))


class TestXLambda(unittest.TestCase):
    def test_feasible_unconstrained(self):
        solution = x_lambda(np.array([3.0, 1.0]), LambdaSeq([2.0, 1.0]))
        np.testing.assert_array_equal(solution.x, [1.0, 0.0])
        self.assertEqual([(b.start, b.end, b.value) for b in solution.blocks], [(0, 0, 1.0), (1, 1, 0.0)])

    def test_pooled(self):
        solution = x_lambda(np.array([3.0, 3.0]), LambdaSeq([2.0, 1.0]))
        np.testing.assert_array_equal(solution.x, [1.5, 1.5])
        self.assertEqual(len(solution.blocks), 1)

    def test_nonnegativity_binds(self):
        solution = x_lambda(np.array([0.0, 0.0]), LambdaSeq([1.0, 0.0]))
        np.testing.assert_array_equal(solution.x, [0.0, 0.0])

    def test_runs_are_maximal(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            n = int(rng.integers(1, 15))
            w = rng.normal(scale=2.0, size=n)
            solution = x_lambda(w, _random_lambda(rng, n))
            self.assertTrue(np.all(solution.values[1:] < solution.values[:-1]))
            self.assertTrue(np.all(solution.values >= 0))
            lengths = np.diff(np.append(solution.starts, n))
            np.testing.assert_array_equal(np.repeat(solution.values, lengths), solution.x)

    def test_matches_active_set_oracle(self):
        rng = np.random.default_rng(2024)
        for case in range(1000):
            n = int(rng.integers(1, 7))
            w = rng.normal(scale=3.0, size=n)
            if case % 4 == 0:
                w = np.round(w)
            lam = _random_lambda(rng, n, zero_tail=case % 5 == 0)
            expected = active_set_qp_oracle(w, lam)
            np.testing.assert_allclose(x_lambda(w, lam).x, expected, atol=1e-10, err_msg=f"w={w}, lam={lam.lam}")

    def test_oracle_size_limit(self):
        lam = LambdaSeq(np.linspace(2.0, 0.5, 8))
        self.assertEqual(active_set_qp_oracle(np.ones(8), lam).shape, (8,))
        with self.assertRaises(ValidationError):
            active_set_qp_oracle(np.ones(9), LambdaSeq(np.linspace(2.0, 0.5, 9)))

    def test_length_mismatch(self):
        with self.assertRaises(ValidationError):
            x_lambda(np.zeros(3), LambdaSeq([1.0, 1.0]))


class TestProx(unittest.TestCase):
    def setUp(self):
        self.lam = LambdaSeq([2.0, 1.0])

    def test_examples(self):
        np.testing.assert_array_equal(prox_sorted_l1(np.array([3.0, -3.0]), self.lam).x, [1.5, -1.5])
        np.testing.assert_array_equal(prox_sorted_l1(np.array([-3.0, 1.0]), self.lam).x, [-1.0, 0.0])

    def test_zero_penalty_is_identity(self):
        y = np.random.default_rng(0).normal(size=6)
        np.testing.assert_array_equal(prox_sorted_l1(y, LambdaSeq.relaxed(np.zeros(6))).x, y)

    def test_scaled(self):
        y = np.array([3.0, 3.0])
        np.testing.assert_array_equal(prox_scaled(y, 1.0, self.lam).x, prox_sorted_l1(y, self.lam).x)
        np.testing.assert_array_equal(prox_scaled(y, 2.0, self.lam).x, [0.0, 0.0])
        np.testing.assert_allclose(prox_scaled(np.array([3.0, -3.0]), 1e-8, self.lam).x, [3.0, -3.0], atol=1e-7)
        with self.assertRaises(ValidationError):
            prox_scaled(y, 0.0, self.lam)

    def test_signed_permutation_equivariance(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 40))
            lam = _random_lambda(rng, n)
            y = rng.normal(scale=2.0, size=n)
            perm, signs = rng.permutation(n), rng.choice([-1.0, 1.0], size=n)
            expected = signs * prox_sorted_l1(y, lam).x[perm]
            np.testing.assert_allclose(prox_sorted_l1(signs * y[perm], lam).x, expected, atol=1e-12)

    def test_sorted_solution(self):
        result = prox_sorted_l1(np.array([-3.0, 5.0, 0.5, 2.0]), LambdaSeq([2.0, 1.5, 1.0, 0.5]))
        np.testing.assert_array_equal(sorted_solution(result), result.sorted.x)
        np.testing.assert_array_equal(result.pi.inverse(sorted_solution(result)), result.x)

    def test_is_minimizer(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            lam = LambdaSeq(np.sort(rng.uniform(0.1, 2.0, n))[::-1])
            y = rng.normal(scale=2.0, size=n)
            x = prox_sorted_l1(y, lam).x

            def objective(v):
                return 0.5 * np.dot(v - y, v - y) + penalty_value(v, lam)

            best = objective(x)
            for _ in range(20):
                self.assertLessEqual(best, objective(x + 1e-3 * rng.normal(size=n)) + 1e-12)

    def test_firmly_nonexpansive(self):
        rng = np.random.default_rng(4)
        lam = LambdaSeq(np.sort(rng.uniform(0.1, 2.0, 10))[::-1])
        for _ in range(100):
            u, v = rng.normal(scale=2.0, size=(2, 10))
            pu, pv = prox_sorted_l1(u, lam).x, prox_sorted_l1(v, lam).x
            self.assertLessEqual(np.dot(pu - pv, pu - pv), np.dot(pu - pv, u - v) + 1e-12)


class TestConjugateAndBall(unittest.TestCase):
    def setUp(self):
        self.lam = LambdaSeq([2.0, 1.0])

    def test_conjugate_example(self):
        np.testing.assert_array_equal(prox_conjugate_scaled(np.array([3.0, 3.0]), 1.0, self.lam), [1.5, 1.5])
        np.testing.assert_array_equal(prox_conjugate_scaled(np.zeros(2), 1.0, self.lam), [0.0, 0.0])

    def test_moreau_identity(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            n = int(rng.integers(1, 12))
            lam = LambdaSeq(np.sort(rng.uniform(0.1, 2.0, n))[::-1])
            sigma = float(rng.uniform(0.1, 10.0))
            w = rng.normal(scale=5.0, size=n)
            conj = prox_conjugate_scaled(w, sigma, lam)
            np.testing.assert_allclose(prox_scaled(w, sigma, lam).x + sigma * conj, w, atol=1e-12)
            self.assertLessEqual(dual_ball_violation(conj, lam), 1e-10)

    def test_ball_violation(self):
        self.assertEqual(dual_ball_violation(np.array([1.0, -3.0]), self.lam), 1.0)
        self.assertEqual(dual_ball_violation(np.zeros(2), self.lam), 0.0)
        self.assertEqual(dual_ball_violation(self.lam.lam, self.lam), 0.0)


if __name__ == "__main__":
    unittest.main()
