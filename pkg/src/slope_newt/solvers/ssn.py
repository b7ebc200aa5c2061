from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..models.errors import NumericalError, ValidationError
from ..models.problem import LambdaSeq, ProblemData
from ..prox.jacobian import (NewtonConfig, Strategy, active_partition, assemble_newton_operator, jacobian_factors,
                             solve_newton_system)
from ..prox.sorted_prox import ProxResult, prox_scaled
from ..utils.logging import logger

# Armijo comparisons allow this many ulps of |Psi| of roundoff.
ARMIJO_ROUNDOFF_ULPS = 10.0


@dataclass(frozen=True)
class SsnConfig:
    """
    Parameters of the semismooth Newton inner solver.

    :ivar mu: Armijo sufficient-decrease constant, in ``(0, 1/2)``.
    :type mu: float
    :ivar eta_bar: Cap of the linear-solve forcing term, in ``(0, 1)``.
    :type eta_bar: float
    :ivar tau: Exponent of the forcing term ``||grad||^(1 + tau)``, in ``(0, 1]``.
    :type tau: float
    :ivar backtrack: Step shrink factor of the line search, in ``(0, 1)``.
    :type backtrack: float
    :ivar max_newton_iters: Newton iteration cap per subproblem.
    :type max_newton_iters: int
    :ivar max_linesearch: Backtracking cap per Newton iteration.
    :type max_linesearch: int
    :ivar newton: Strategy thresholds for the Newton system.
    :type newton: NewtonConfig
    :ivar strategy: Forces a linear-solve strategy when set.
    :type strategy: Optional[Strategy]
    """
    mu: float = 1e-4
    eta_bar: float = 1e-2
    tau: float = 0.5
    backtrack: float = 0.5
    max_newton_iters: int = 50
    max_linesearch: int = 50
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    strategy: Optional[Strategy] = None

    def __post_init__(self):
        if not 0 < self.mu < 0.5:
            raise ValidationError(f"mu must lie in (0, 1/2), got {self.mu!r}")
        if not 0 < self.eta_bar < 1:
            raise ValidationError(f"eta_bar must lie in (0, 1), got {self.eta_bar!r}")
        if not 0 < self.tau <= 1:
            raise ValidationError(f"tau must lie in (0, 1], got {self.tau!r}")
        if not 0 < self.backtrack < 1:
            raise ValidationError(f"backtrack must lie in (0, 1), got {self.backtrack!r}")
        if self.max_newton_iters < 0 or self.max_linesearch < 1:
            raise ValidationError("iteration caps must be positive")


@dataclass(frozen=True)
class ToleranceSpec:
    """
    Stopping target on ``||grad Psi||``. ``bound`` receives the prox result at
    the current iterate (whose ``x`` is the tentative multiplier update) so the
    outer loop can make the target depend on it.

    :ivar bound: Maps the current prox result to the target.
    :type bound: Callable[[ProxResult], float]
    :ivar floor: Lower limit of the target, above the roundoff level of the gradient.
    :type floor: float
    """
    bound: Callable[[ProxResult], float]
    floor: float = 0.0

    def target(self, prox: ProxResult) -> float:
        return max(self.bound(prox), self.floor)

    @classmethod
    def fixed(cls, tol: float) -> "ToleranceSpec":
        return cls(lambda _: tol)


@dataclass
class SsnState:
    """
    Iterate of the inner solver.

    :ivar y: Dual iterate.
    :type y: np.ndarray
    :ivar grad: ``y + b - A prox_cache.x``.
    :type grad: np.ndarray
    :ivar prox_cache: Prox of ``x_k - sigma A^T y`` at the current ``y``.
    :type prox_cache: ProxResult
    :ivar psi: ``Psi_k(y)``.
    :type psi: float
    :ivar newton_iters: Accepted Newton iterations.
    :type newton_iters: int
    :ivar cg_iters_total: Linear-solve iterations (one per direct solve).
    :type cg_iters_total: int
    :ivar stagnated: Set when a line search ran out of backtracking steps.
    :type stagnated: bool
    :ivar converged: Set when the gradient norm met the stopping target.
    :type converged: bool
    :ivar inexact_solves: Newton systems whose linear solve missed its tolerance.
    :type inexact_solves: int
    :ivar grad_norms: ``||grad||`` at every iterate, starting point included.
    :type grad_norms: List[float]
    """
    y: np.ndarray
    grad: np.ndarray
    prox_cache: ProxResult
    psi: float
    newton_iters: int = 0
    cg_iters_total: int = 0
    stagnated: bool = False
    converged: bool = False
    inexact_solves: int = 0
    grad_norms: List[float] = field(default_factory=list)

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad))


def _evaluate(y: np.ndarray, Aty: np.ndarray, x_k: np.ndarray, sigma: float,
              p: ProblemData, lam: LambdaSeq) -> Tuple[float, np.ndarray, ProxResult]:
    prox = prox_scaled(x_k - sigma * Aty, sigma, lam)
    q = prox.x
    psi = (0.5 * np.dot(y, y) + np.dot(p.b, y)
           - np.dot(x_k, x_k) / (2.0 * sigma) + np.dot(q, q) / (2.0 * sigma))
    grad = y + p.b - p.matvec(q)
    return float(psi), grad, prox


def _check_args(y: np.ndarray, x_k: np.ndarray, sigma: float, p: ProblemData,
                lam: LambdaSeq) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    x_k = np.asarray(x_k, dtype=np.float64).reshape(-1)
    if y.shape[0] != p.m or x_k.shape[0] != p.n or len(lam) != p.n:
        raise ValidationError(
            f"dimension mismatch: y={y.shape[0]}, x_k={x_k.shape[0]}, lam={len(lam)} for (m, n)=({p.m}, {p.n})")
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    return y, x_k


def psi_value(y: np.ndarray, x_k: np.ndarray, sigma: float, p: ProblemData, lam: LambdaSeq) -> float:
    """
    The inner objective
    ``Psi_k(y) = 1/2 ||y||^2 + <b, y> - ||x_k||^2/(2 sigma) + ||Prox_{sigma penalty}(x_k - sigma A^T y)||^2/(2 sigma)``.

    :param y: Dual point of length ``m``.
    :type y: np.ndarray
    :param x_k: Current multiplier of length ``n``.
    :type x_k: np.ndarray
    :param sigma: Positive penalty parameter.
    :type sigma: float
    :param p: Problem instance.
    :type p: ProblemData
    :param lam: Penalty weights.
    :type lam: LambdaSeq
    :return: ``Psi_k(y)``.
    :rtype: float
    """
    y, x_k = _check_args(y, x_k, sigma, p, lam)
    return _evaluate(y, p.rmatvec(y), x_k, sigma, p, lam)[0]


def grad_psi(y: np.ndarray, x_k: np.ndarray, sigma: float, p: ProblemData,
             lam: LambdaSeq) -> Tuple[np.ndarray, ProxResult]:
    """
    ``grad Psi_k(y) = y + b - A Prox_{sigma penalty}(x_k - sigma A^T y)`` together
    with the prox result, which the caller reuses for the Jacobian and the
    multiplier update.
    """
    y, x_k = _check_args(y, x_k, sigma, p, lam)
    _, grad, prox = _evaluate(y, p.rmatvec(y), x_k, sigma, p, lam)
    return grad, prox


def _newton_direction(state: SsnState, p: ProblemData, sigma: float, cfg: SsnConfig,
                      gnorm: float) -> Tuple[np.ndarray, float]:
    factors = jacobian_factors(active_partition(state.prox_cache), state.prox_cache.pi)
    op = assemble_newton_operator(p, factors, sigma, cfg.strategy, cfg.newton)
    forcing = min(cfg.eta_bar, gnorm ** (1.0 + cfg.tau))

    sol = solve_newton_system(op, -state.grad, forcing, cfg.newton.cg_maxit)
    state.cg_iters_total += sol.iterations
    state.inexact_solves += not sol.converged
    d, slope = sol.d, float(np.dot(state.grad, sol.d))
    if slope >= 0 and op.strategy == Strategy.PCG:
        logger.warning("Newton direction is not a descent direction (slope %.3e); re-solving with tighter CG", slope)
        sol = solve_newton_system(op, -state.grad, 1e-3 * forcing, 4 * cfg.newton.cg_maxit)
        state.cg_iters_total += sol.iterations
        state.inexact_solves += not sol.converged
        d, slope = sol.d, float(np.dot(state.grad, sol.d))
    if slope >= 0:
        logger.warning("falling back to a steepest-descent step (slope %.3e)", slope)
        d, slope = -state.grad, -gnorm * gnorm
    return d, slope


def ssn_solve(x_k: np.ndarray, sigma: float, y0: np.ndarray, stop: ToleranceSpec, cfg: SsnConfig,
              p: ProblemData, lam: LambdaSeq) -> SsnState:
    """
    Minimizes ``Psi_k`` by the semismooth Newton method.

    Every iteration builds a generalized Jacobian of the prox at
    ``x_k - sigma A^T y``, solves ``V d = -grad`` with
    ``V = I + sigma A M A^T`` to the forcing tolerance
    ``min{eta_bar, ||grad||^(1 + tau)}`` and backtracks until the Armijo
    condition ``Psi(y + t d) <= Psi(y) + mu t <grad, d>`` holds. The loop
    stops when ``||grad|| <= stop.target(prox)`` (setting ``converged``) or
    after ``cfg.max_newton_iters`` iterations. Linear solves that miss their
    tolerance are counted in ``inexact_solves``. A line search that runs out
    of steps sets ``stagnated`` and returns the last accepted iterate, so
    ``Psi`` never exceeds its starting value.

    :param x_k: Current multiplier.
    :type x_k: np.ndarray
    :param sigma: Positive penalty parameter.
    :type sigma: float
    :param y0: Starting dual point.
    :type y0: np.ndarray
    :param stop: Gradient-norm target.
    :type stop: ToleranceSpec
    :param cfg: Solver parameters.
    :type cfg: SsnConfig
    :param p: Problem instance.
    :type p: ProblemData
    :param lam: Penalty weights.
    :type lam: LambdaSeq
    :return: The final state.
    :rtype: SsnState
    :raises NumericalError: If ``Psi`` or its gradient becomes non-finite.
    """
    y, x_k = _check_args(y0, x_k, sigma, p, lam)
    y = y.copy()
    Aty = p.rmatvec(y)
    psi, grad, prox = _evaluate(y, Aty, x_k, sigma, p, lam)
    state = SsnState(y, grad, prox, psi)

    while True:
        if not (np.isfinite(state.psi) and np.all(np.isfinite(state.grad))):
            raise NumericalError("non-finite Psi or gradient in the Newton solver", {
                "newton_iter": state.newton_iters, "sigma": sigma, "psi": state.psi,
                "y_norm": float(np.linalg.norm(state.y)), "x_k_norm": float(np.linalg.norm(x_k))})
        gnorm = state.grad_norm
        state.grad_norms.append(gnorm)
        if gnorm <= stop.target(state.prox_cache):
            state.converged = True
            break
        if state.newton_iters >= cfg.max_newton_iters:
            break

        d, slope = _newton_direction(state, p, sigma, cfg, gnorm)
        Atd = p.rmatvec(d)
        slack = ARMIJO_ROUNDOFF_ULPS * np.finfo(np.float64).eps * max(1.0, abs(state.psi))
        step = 1.0
        for _ in range(cfg.max_linesearch):
            y_t = state.y + step * d
            Aty_t = Aty + step * Atd
            psi_t, grad_t, prox_t = _evaluate(y_t, Aty_t, x_k, sigma, p, lam)
            if psi_t <= state.psi + cfg.mu * step * slope + slack:
                break
            step *= cfg.backtrack
        else:
            state.stagnated = True
            logger.warning("line search failed after %d steps (||grad||=%.3e, sigma=%.3e)",
                           cfg.max_linesearch, gnorm, sigma)
            break

        state.y, state.grad, state.prox_cache, state.psi = y_t, grad_t, prox_t, psi_t
        Aty = Aty_t
        state.newton_iters += 1
        logger.debug("SSN iter %d: psi=%.12e ||grad||=%.3e step=%.3e",
                     state.newton_iters, psi_t, np.linalg.norm(grad_t), step)

    return state
