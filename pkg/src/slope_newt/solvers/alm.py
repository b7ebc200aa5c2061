import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from ..models.errors import StagnationError, ValidationError
from ..models.metrics import primal_objective
from ..models.problem import LambdaSeq, ProblemData
from ..models.report import Algorithm, SolveReport, TraceRecord
from ..prox.sorted_prox import ProxResult
from ..utils.logging import logger
from .apg import estimate_lipschitz
from .base import Solver
from .ssn import SsnConfig, ToleranceSpec, ssn_solve

# Allowed primal objective increase per outer iteration, relative to 1 + |Obj_P|.
OBJECTIVE_SLACK = 1e-12


@dataclass
class AlmState:
    """
    Outer-loop iterate ``(x^k, y^k, sigma_k)`` and its trace.

    :ivar x: Multiplier (primal iterate).
    :type x: np.ndarray
    :ivar y: Dual iterate.
    :type y: np.ndarray
    :ivar sigma: Current penalty parameter.
    :type sigma: float
    :ivar k: Completed outer iterations; equals ``len(history)``.
    :type k: int
    :ivar history: One record per completed outer iteration.
    :type history: List[TraceRecord]
    """
    x: np.ndarray
    y: np.ndarray
    sigma: float
    k: int = 0
    history: List[TraceRecord] = field(default_factory=list)


@dataclass(frozen=True)
class AlmConfig:
    """
    Parameters of the augmented Lagrangian outer loop.

    The inner tolerances decay geometrically: ``eps_k = epsA0 rho^k``,
    ``delta_k = deltaB0 rho^k`` and ``delta'_k = deltaP0 rho^k``.

    :ivar sigma0: Initial penalty parameter; ``None`` picks
        ``1 / ||A||_2^2`` clamped to ``[sigma_min, 1]``.
    :type sigma0: Optional[float]
    :ivar sigma_growth: Factor applied to sigma after every outer iteration.
    :type sigma_growth: float
    :ivar sigma_max: Upper limit of sigma.
    :type sigma_max: float
    :ivar sigma_min: Lower limit of sigma when a subproblem is retried.
    :type sigma_min: float
    :ivar epsA0: Base of the absolute criterion sequence.
    :type epsA0: float
    :ivar deltaB0: Base of the first relative criterion sequence.
    :type deltaB0: float
    :ivar deltaP0: Base of the second relative criterion sequence.
    :type deltaP0: float
    :ivar rho: Decay ratio of the three sequences, in ``(0, 1)``.
    :type rho: float
    :ivar tol_G: Termination tolerance on the relative duality gap.
    :type tol_G: float
    :ivar tol_D: Termination tolerance on the dual infeasibility.
    :type tol_D: float
    :ivar max_outer: Outer iteration cap.
    :type max_outer: int
    :ivar grad_floor: Inner targets never go below ``grad_floor (1 + ||b||)``.
    :type grad_floor: float
    :ivar ssn: Inner solver parameters.
    :type ssn: SsnConfig
    :ivar sigma_rule: Optional replacement of the fixed-growth schedule; maps
        the state after an outer iteration to the next sigma (clamped to
        ``sigma_max``).
    :type sigma_rule: Optional[Callable[[AlmState], float]]
    """
    sigma0: Optional[float] = None
    sigma_growth: float = 3.0
    sigma_max: float = 1e6
    sigma_min: float = 1e-4
    epsA0: float = 1.0
    deltaB0: float = 1.0
    deltaP0: float = 1.0
    rho: float = 0.5
    tol_G: float = 1e-6
    tol_D: float = 1e-6
    max_outer: int = 100
    grad_floor: float = 1e-12
    ssn: SsnConfig = field(default_factory=SsnConfig)
    sigma_rule: Optional[Callable[[AlmState], float]] = None

    def __post_init__(self):
        if self.sigma0 is not None and not self.sigma0 > 0:
            raise ValidationError(f"sigma0 must be positive, got {self.sigma0!r}")
        if not self.sigma_growth > 1:
            raise ValidationError(f"sigma_growth must exceed 1, got {self.sigma_growth!r}")
        if not 0 < self.sigma_min <= self.sigma_max:
            raise ValidationError(f"need 0 < sigma_min <= sigma_max, got {self.sigma_min!r}, {self.sigma_max!r}")
        if min(self.epsA0, self.deltaB0, self.deltaP0) <= 0:
            raise ValidationError("criterion sequence bases must be positive")
        if not 0 < self.rho < 1:
            raise ValidationError(f"rho must lie in (0, 1), got {self.rho!r}")
        if not (self.tol_G > 0 and self.tol_D > 0):
            raise ValidationError("tolerances must be positive")
        if self.max_outer < 1:
            raise ValidationError(f"max_outer must be at least 1, got {self.max_outer}")

    def eps(self, k: int) -> float:
        return self.epsA0 * self.rho ** k

    def delta(self, k: int) -> float:
        return self.deltaB0 * self.rho ** k

    def delta_prime(self, k: int) -> float:
        return self.deltaP0 * self.rho ** k


def criteria_bound(k: int, sigma: float, dx_norm: float, cfg: AlmConfig) -> float:
    """
    The largest ``||grad Psi_k||`` for which the absolute criterion and both
    relative criteria hold at once:
    ``min{eps_k / sqrt(sigma), delta_k / sqrt(sigma) dx, delta'_k / sigma dx}``.

    :param k: Outer iteration index (0-based).
    :type k: int
    :param sigma: Positive penalty parameter.
    :type sigma: float
    :param dx_norm: ``||x^{k+1} - x^k||`` of the tentative update.
    :type dx_norm: float
    :param cfg: Outer-loop parameters.
    :type cfg: AlmConfig
    :return: The bound; zero when ``dx_norm`` is zero.
    :rtype: float
    """
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    if dx_norm < 0:
        raise ValidationError(f"dx_norm must be nonnegative, got {dx_norm!r}")
    root = math.sqrt(sigma)
    return min(cfg.eps(k) / root, cfg.delta(k) / root * dx_norm, cfg.delta_prime(k) / sigma * dx_norm)


def default_sigma0(p: ProblemData, cfg: AlmConfig) -> float:
    norm_sq = estimate_lipschitz(p)
    if norm_sq == 0.0:
        return 1.0
    return float(np.clip(1.0 / norm_sq, cfg.sigma_min, 1.0))


class AlmSolver(Solver):
    """
    Inexact augmented Lagrangian method on the dual problem, with the
    subproblems solved by semismooth Newton (:func:`ssn_solve`).

    Each outer iteration minimizes ``Psi_k`` until its gradient satisfies
    :func:`criteria_bound` for the tentative update, sets
    ``x^{k+1} = Prox_{sigma_k penalty}(x^k - sigma_k A^T y^{k+1})`` and grows
    sigma. A tentative update equal to ``x^k`` is accepted with the absolute
    criterion alone, and a tentative update that raises the primal objective
    is only accepted at the gradient floor.

    A subproblem that ends without meeting its target (Newton cap or line
    search stall) is discarded: ``x^k`` is kept, sigma is divided by
    ``sigma_growth`` and the subproblem is solved again from the last dual
    point. :class:`StagnationError` is raised when this happens at
    ``sigma_min``.

    Warm starts are ``(x0, y0)`` pairs; either entry may be ``None``.
    """
    algorithm = Algorithm.NEWT_ALM

    def __init__(self, config: AlmConfig = AlmConfig()):
        super().__init__(config)

    def _stop(self, k: int, sigma: float, x_k: np.ndarray, obj_k: float, floor: float,
              p: ProblemData, lam: LambdaSeq) -> ToleranceSpec:
        cfg = self.config
        slack = OBJECTIVE_SLACK * (1.0 + abs(obj_k))

        def bound(prox: ProxResult) -> float:
            dx = float(np.linalg.norm(prox.x - x_k))
            if dx == 0.0:
                return cfg.eps(k) / math.sqrt(sigma)
            if primal_objective(prox.x, p, lam) > obj_k + slack:
                return 0.0
            return criteria_bound(k, sigma, dx, cfg)

        return ToleranceSpec(bound, floor)

    def _next_sigma(self, state: AlmState) -> float:
        cfg = self.config
        if cfg.sigma_rule is not None:
            proposed = float(cfg.sigma_rule(state))
            if not proposed > 0:
                raise ValidationError(f"sigma_rule returned a non-positive value {proposed!r}")
            return min(cfg.sigma_max, proposed)
        return min(cfg.sigma_max, cfg.sigma_growth * state.sigma)

    def solve(self, p: ProblemData, lam: LambdaSeq,
              warm: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray]]] = None) -> SolveReport:
        started = time.perf_counter()
        self._check_problem(p, lam)
        cfg: AlmConfig = self.config
        x0, y0 = warm if warm is not None else (None, None)
        sigma = cfg.sigma0 if cfg.sigma0 is not None else default_sigma0(p, cfg)
        state = AlmState(self._start_vector(x0, p.n, "x0"), self._start_vector(y0, p.m, "y0"), sigma)
        floor = cfg.grad_floor * (1.0 + float(np.linalg.norm(p.b)))
        obj = primal_objective(state.x, p, lam)
        inner_total = linear_total = 0

        while state.k < cfg.max_outer:
            k, x_k = state.k, state.x
            stop = self._stop(k, state.sigma, x_k, obj, floor, p, lam)
            inner = ssn_solve(x_k, state.sigma, state.y, stop, cfg.ssn, p, lam)
            inner_total += inner.newton_iters
            linear_total += inner.cg_iters_total
            if inner.inexact_solves:
                logger.info("subproblem %d: %d Newton systems missed their CG tolerance", k, inner.inexact_solves)

            if not inner.converged:
                if state.sigma <= cfg.sigma_min:
                    eta_G, eta_D = self._measures(state.x, state.y, p, lam)
                    raise StagnationError("Newton subproblem failed with sigma at its minimum", {
                        "k": k, "sigma": state.sigma, "grad_norm": inner.grad_norm,
                        "newton_iters": inner.newton_iters, "stagnated": inner.stagnated,
                        "eta_G": eta_G, "eta_D": eta_D})
                retry = max(cfg.sigma_min, state.sigma / cfg.sigma_growth)
                logger.warning("subproblem %d ended at ||grad||=%.3e (line search stalled: %s); "
                               "retrying with sigma=%.3e", k, inner.grad_norm, inner.stagnated, retry)
                state.y, state.sigma = inner.y, retry
                continue

            x_next = inner.prox_cache.x
            dx = float(np.linalg.norm(x_next - x_k))
            state.x, state.y = x_next, inner.y
            self._check_finite({"k": k, "sigma": state.sigma, "grad_norm": inner.grad_norm, "dx_norm": dx},
                               state.x, state.y)
            obj = primal_objective(state.x, p, lam)

            eta_G, eta_D = self._measures(state.x, state.y, p, lam)
            state.history.append(TraceRecord(
                iteration=k, eta_G=eta_G, eta_D=eta_D, sigma=state.sigma,
                grad_norm=inner.grad_norm, dx_norm=dx, inner_iters=inner.newton_iters, obj_primal=obj))
            state.k += 1
            logger.debug("ALM iter %d: sigma=%.3e ||grad||=%.3e dx=%.3e eta_G=%.3e eta_D=%.3e newton=%d",
                         k, state.sigma, inner.grad_norm, dx, eta_G, eta_D, inner.newton_iters)

            if self._terminated(eta_G, eta_D):
                break
            state.sigma = self._next_sigma(state)

        return self._report(p, lam, state.x, state.y, outer_iters=state.k, started=started,
                            history=state.history, inner_iters_total=inner_total,
                            linear_solve_iters=linear_total)


def alm_solve(p: ProblemData, lam: LambdaSeq, cfg: AlmConfig = AlmConfig(),
              warm: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray]]] = None) -> SolveReport:
    """Runs :class:`AlmSolver` with ``cfg``; see :meth:`AlmSolver.solve`."""
    return AlmSolver(cfg).solve(p, lam, warm)
