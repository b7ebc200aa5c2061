import numpy as np

from ..prox.sorted_prox import dual_ball_violation, prox_sorted_l1
from .errors import ValidationError
from .problem import LambdaSeq, ProblemData, penalty_value


def _check_dims(x: np.ndarray, p: ProblemData, lam: LambdaSeq) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != p.n or len(lam) != p.n:
        raise ValidationError(f"dimension mismatch: x has {x.shape[0]}, lam has {len(lam)}, n={p.n}")
    return x


def primal_objective(x: np.ndarray, p: ProblemData, lam: LambdaSeq) -> float:
    """``1/2 ||Ax - b||^2 + penalty(x)``."""
    x = _check_dims(x, p, lam)
    r = p.residual(x)
    return float(0.5 * np.dot(r, r) + penalty_value(x, lam))


def dual_objective(y: np.ndarray, p: ProblemData) -> float:
    """``-b^T y - 1/2 ||y||^2``, reported without projecting ``y`` onto the feasible set."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != p.m:
        raise ValidationError(f"y has {y.shape[0]} entries, expected m={p.m}")
    return float(-np.dot(p.b, y) - 0.5 * np.dot(y, y))


def relative_duality_gap(x: np.ndarray, y: np.ndarray, p: ProblemData, lam: LambdaSeq) -> float:
    """
    Relative duality gap ``|Obj_P - Obj_D| / max{1, |Obj_P|}``.

    :param x: Primal point of length ``n``.
    :type x: np.ndarray
    :param y: Dual point of length ``m``.
    :type y: np.ndarray
    :param p: Problem instance.
    :type p: ProblemData
    :param lam: Penalty weights.
    :type lam: LambdaSeq
    :return: The nonnegative gap measure.
    :rtype: float
    """
    obj_p = primal_objective(x, p, lam)
    obj_d = dual_objective(y, p)
    return abs(obj_p - obj_d) / max(1.0, abs(obj_p))


def dual_infeasibility(x: np.ndarray, p: ProblemData, lam: LambdaSeq) -> float:
    """
    ``max{0, max_i sum_{j<=i} (|A^T(Ax - b)|_j - lam_j)}``: how far the gradient
    of the loss at ``x`` is from the dual-norm unit ball.
    """
    x = _check_dims(x, p, lam)
    return dual_ball_violation(p.rmatvec(p.residual(x)), lam)


def kkt_residual(x: np.ndarray, p: ProblemData, lam: LambdaSeq) -> float:
    """
    Relative KKT residual
    ``||x - Prox(x - A^T(Ax - b))|| / (1 + ||x|| + ||A^T(Ax - b)||)``.
    """
    x = _check_dims(x, p, lam)
    g = p.rmatvec(p.residual(x))
    step = x - prox_sorted_l1(x - g, lam).x
    return float(np.linalg.norm(step) / (1.0 + np.linalg.norm(x) + np.linalg.norm(g)))


def nnz999(x: np.ndarray) -> int:
    """
    Smallest ``t`` such that the ``t`` largest magnitudes hold at least 99.9%
    of ``||x||_1``; ``0`` for the zero vector.
    """
    a = np.sort(np.abs(np.asarray(x, dtype=np.float64).reshape(-1)))[::-1]
    total = a.sum()
    if total == 0.0:
        return 0
    return int(np.argmax(np.cumsum(a) >= 0.999 * total)) + 1
