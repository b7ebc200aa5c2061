from dataclasses import dataclass
from itertools import combinations
from typing import List, NamedTuple

import numpy as np
from scipy.optimize import isotonic_regression

from ..models.errors import ValidationError
from ..models.problem import LambdaSeq


@dataclass(frozen=True, eq=False)
class SignedPermutation:
    """
    A signed permutation ``pi`` with ``pi(y) = |y|`` sorted non-increasingly.

    :ivar perm: ``perm[i]`` is the source index of the i-th largest ``|y|``.
    :type perm: np.ndarray
    :ivar signs: ``+1``/``-1`` factors such that ``signs * y[perm] >= 0``.
    :type signs: np.ndarray
    """
    perm: np.ndarray
    signs: np.ndarray

    def __len__(self) -> int:
        return self.perm.shape[0]

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Maps original coordinates to sorted ones: ``(pi v)_i = signs_i v[perm_i]``."""
        return self.signs * v[self.perm]

    def inverse(self, v: np.ndarray) -> np.ndarray:
        """Maps sorted coordinates back: the inverse of :meth:`apply`."""
        out = np.empty_like(v, dtype=np.float64)
        out[self.perm] = self.signs * v
        return out


class Block(NamedTuple):
    start: int
    end: int
    value: float


@dataclass(frozen=True, eq=False)
class SortedSolution:
    """
    The solution of the monotone-cone problem in sorted coordinates, stored as
    maximal runs of equal value. Entries of a run are copies of one float, so
    equality inside a run is exact.

    :ivar x: The non-increasing, nonnegative solution.
    :type x: np.ndarray
    :ivar starts: Start index of every run.
    :type starts: np.ndarray
    :ivar values: Value of every run.
    :type values: np.ndarray
    """
    x: np.ndarray
    starts: np.ndarray
    values: np.ndarray

    @property
    def blocks(self) -> List[Block]:
        ends = np.append(self.starts[1:], self.x.shape[0]) - 1
        return [Block(int(s), int(e), float(v)) for s, e, v in zip(self.starts, ends, self.values)]


@dataclass(frozen=True, eq=False)
class ProxResult:
    """
    Value of the sorted-l1 proximal operator together with the structure that
    produced it.

    :ivar x: ``Prox(y)`` in original coordinates.
    :type x: np.ndarray
    :ivar pi: The signed sort of the input.
    :type pi: SignedPermutation
    :ivar sorted: The solution in sorted coordinates with its runs.
    :type sorted: SortedSolution
    """
    x: np.ndarray
    pi: SignedPermutation
    sorted: SortedSolution

    @property
    def blocks(self) -> List[Block]:
        return self.sorted.blocks


def signed_sort(y: np.ndarray) -> SignedPermutation:
    """
    Sorts ``|y|`` non-increasingly. Ties keep their original index order and
    the sign of a zero entry is ``+1``.

    :param y: Input vector.
    :type y: np.ndarray
    :return: The signed permutation.
    :rtype: SignedPermutation
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    perm = np.argsort(-np.abs(y), kind="stable")
    signs = np.where(y[perm] < 0, -1.0, 1.0)
    return SignedPermutation(perm, signs)


def _x_lambda(w: np.ndarray, lam: np.ndarray) -> SortedSolution:
    d = w - lam
    fit = isotonic_regression(d, increasing=False)
    starts = np.asarray(fit.blocks[:-1], dtype=np.int64)
    values = np.maximum(fit.x[starts], 0.0)

    # Runs are maximal: clamped zeros and tied pools merge with their neighbour
    keep = np.ones(values.shape[0], dtype=bool)
    keep[1:] = values[1:] != values[:-1]
    starts, values = starts[keep], values[keep]

    lengths = np.diff(np.append(starts, d.shape[0]))
    return SortedSolution(np.repeat(values, lengths), starts, values)


def x_lambda(w: np.ndarray, lam: LambdaSeq) -> SortedSolution:
    """
    Solves ``min 1/2 ||x - w||^2 + lam^T x`` subject to
    ``x_1 >= x_2 >= ... >= x_n >= 0``.

    The problem is the non-increasing isotonic regression of ``w - lam`` (pool
    adjacent violators) followed by clamping the trailing negative runs at zero.

    :param w: Input vector; any vector is accepted.
    :type w: np.ndarray
    :param lam: Penalty weights.
    :type lam: LambdaSeq
    :return: Sorted solution with its run structure.
    :rtype: SortedSolution
    :raises ValidationError: On length mismatch.
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    if w.shape[0] != len(lam):
        raise ValidationError(f"length mismatch: w has {w.shape[0]} entries, lam has {len(lam)}")
    return _x_lambda(w, lam.lam)


def _prox(y: np.ndarray, lam: np.ndarray) -> ProxResult:
    pi = signed_sort(y)
    solution = _x_lambda(pi.apply(y), lam)
    return ProxResult(pi.inverse(solution.x), pi, solution)


def prox_sorted_l1(y: np.ndarray, lam: LambdaSeq) -> ProxResult:
    """
    ``Prox(y) = argmin_x 1/2 ||x - y||^2 + sum_i lam_i |x|_i`` computed as
    ``pi^{-1} x_lambda(pi y)`` with ``pi`` the signed sort of ``y``.

    :raises ValidationError: On length mismatch.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != len(lam):
        raise ValidationError(f"length mismatch: y has {y.shape[0]} entries, lam has {len(lam)}")
    return _prox(y, lam.lam)


def prox_scaled(y: np.ndarray, sigma: float, lam: LambdaSeq) -> ProxResult:
    """Proximal operator of ``sigma * penalty``; equal to the prox with weights ``sigma * lam``."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != len(lam):
        raise ValidationError(f"length mismatch: y has {y.shape[0]} entries, lam has {len(lam)}")
    return _prox(y, lam.scaled(sigma).lam)


def prox_conjugate_scaled(w: np.ndarray, sigma: float, lam: LambdaSeq) -> np.ndarray:
    """
    Proximal point of the conjugate penalty scaled by ``1/sigma`` at ``w/sigma``,
    obtained from the Moreau identity as ``(w - Prox_{sigma penalty}(w)) / sigma``.
    The result lies in the dual-norm unit ball.

    :param w: Input vector.
    :type w: np.ndarray
    :param sigma: Positive scaling.
    :type sigma: float
    :param lam: Penalty weights.
    :type lam: LambdaSeq
    :return: The conjugate proximal point.
    :rtype: np.ndarray
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    return (w - prox_scaled(w, sigma, lam).x) / sigma


def dual_ball_violation(z: np.ndarray, lam: LambdaSeq) -> float:
    """
    ``max{0, max_i sum_{j<=i} (|z|_j - lam_j)}`` with ``|z|`` sorted
    non-increasingly; zero exactly when ``z`` is in the dual-norm unit ball.

    :raises ValidationError: On length mismatch.
    """
    z = np.asarray(z, dtype=np.float64).reshape(-1)
    if z.shape[0] != len(lam):
        raise ValidationError(f"length mismatch: z has {z.shape[0]} entries, lam has {len(lam)}")
    partial = np.cumsum(np.sort(np.abs(z))[::-1] - lam.lam)
    return float(max(0.0, partial.max()))


def difference_matrix(n: int) -> np.ndarray:
    """Dense ``B`` with ``Bx = [x_1 - x_2, ..., x_{n-1} - x_n, x_n]``."""
    B = np.eye(n)
    B[np.arange(n - 1), np.arange(1, n)] = -1.0
    return B


def active_set_qp_oracle(w: np.ndarray, lam: LambdaSeq, tol: float = 1e-12) -> np.ndarray:
    """
    Brute-force reference for :func:`x_lambda` on small ``n``: every subset of
    the rows of ``B`` is tried as the active set, the equality-constrained
    problem is solved in closed form, and the best feasible candidate wins.

    :param w: Input vector, ``len(w) <= 8``.
    :type w: np.ndarray
    :param lam: Penalty weights.
    :type lam: LambdaSeq
    :param tol: Feasibility slack on ``Bx >= 0``.
    :type tol: float
    :return: The minimizer in sorted coordinates.
    :rtype: np.ndarray
    """
    w = np.asarray(w, dtype=np.float64).reshape(-1)
    n = w.shape[0]
    if n > 8:
        raise ValidationError("the active-set oracle enumerates 2^n subsets; use n <= 8")
    d = w - lam.lam
    B = difference_matrix(n)
    best, best_value = None, np.inf
    for size in range(n + 1):
        for active in combinations(range(n), size):
            if active:
                Bs = B[list(active)]
                x = d - Bs.T @ np.linalg.solve(Bs @ Bs.T, Bs @ d)
            else:
                x = d.copy()
            if np.min(B @ x) < -tol * (1.0 + np.abs(d).max()):
                continue
            value = 0.5 * np.dot(x - d, x - d)
            if value < best_value:
                best, best_value = x, value
    return best


def sorted_solution(result: ProxResult) -> np.ndarray:
    """The non-increasing solution ``x_lambda(pi y)`` rebuilt from the runs of ``result``."""
    solution = result.sorted
    lengths = np.diff(np.append(solution.starts, solution.x.shape[0]))
    return np.repeat(solution.values, lengths)
