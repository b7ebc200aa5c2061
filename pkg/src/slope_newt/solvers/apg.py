import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..models.errors import ValidationError
from ..models.problem import LambdaSeq, ProblemData
from ..models.report import Algorithm, SolveReport, TraceRecord
from ..prox.sorted_prox import prox_scaled
from ..utils.logging import logger
from .base import Solver

POWER_ITERATIONS = 20


@dataclass(frozen=True)
class ApgConfig:
    """
    Parameters of the accelerated proximal gradient baseline.

    :ivar max_iters: Iteration cap.
    :type max_iters: int
    :ivar tol_G: Termination tolerance on the relative duality gap.
    :type tol_G: float
    :ivar tol_D: Termination tolerance on the dual infeasibility.
    :type tol_D: float
    :ivar lipschitz_init: Initial ``L``; estimated by power iteration when ``None``.
    :type lipschitz_init: Optional[float]
    :ivar backtrack_up: Factor by which ``L`` grows when the quadratic bound fails.
    :type backtrack_up: float
    :ivar check_every: The termination rule is evaluated every this many iterations.
    :type check_every: int
    :ivar seed: Seed of the power-iteration start vector.
    :type seed: int
    """
    max_iters: int = 50000
    tol_G: float = 1e-6
    tol_D: float = 1e-6
    lipschitz_init: Optional[float] = None
    backtrack_up: float = 2.0
    check_every: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1 or self.check_every < 1:
            raise ValidationError("max_iters and check_every must be positive")
        if not (self.tol_G > 0 and self.tol_D > 0):
            raise ValidationError("tolerances must be positive")
        if self.lipschitz_init is not None and not self.lipschitz_init > 0:
            raise ValidationError(f"lipschitz_init must be positive, got {self.lipschitz_init!r}")
        if not self.backtrack_up > 1:
            raise ValidationError(f"backtrack_up must exceed 1, got {self.backtrack_up!r}")


def estimate_lipschitz(p: ProblemData, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Power-iteration estimate of ``||A||_2^2``, the Lipschitz constant of the loss gradient."""
    v = np.random.default_rng(seed).standard_normal(p.n)
    v /= np.linalg.norm(v)
    estimate = 0.0
    for _ in range(iterations):
        w = p.rmatvec(p.matvec(v))
        estimate = float(np.linalg.norm(w))
        if estimate == 0.0:
            break
        v = w / estimate
    return estimate


class ApgSolver(Solver):
    """
    FISTA on the primal problem with backtracking on the step constant ``L``.

    Every iteration costs one ``A^T`` product at the extrapolated point, one
    ``A`` product per trial point and one prox; ``A z`` is carried along by
    linearity. The dual certificate used by the termination rule is
    ``y = Ax - b``. Warm starts are a single vector ``x0``.
    """
    algorithm = Algorithm.APG

    def __init__(self, config: ApgConfig = ApgConfig()):
        super().__init__(config)

    def solve(self, p: ProblemData, lam: LambdaSeq, warm: Optional[np.ndarray] = None) -> SolveReport:
        started = time.perf_counter()
        self._check_problem(p, lam)
        cfg: ApgConfig = self.config
        x = self._start_vector(warm, p.n, "x0")
        L = cfg.lipschitz_init if cfg.lipschitz_init is not None else estimate_lipschitz(p, seed=cfg.seed)
        L = max(L, np.finfo(np.float64).tiny)

        Ax = p.matvec(x)
        z, Az = x, Ax
        t = 1.0
        history = []
        k = 0
        while k < cfg.max_iters:
            rz = Az - p.b
            grad = p.rmatvec(rz)
            fz = 0.5 * np.dot(rz, rz)
            while True:
                x_new = prox_scaled(z - grad / L, 1.0 / L, lam).x
                Ax_new = p.matvec(x_new)
                diff = x_new - z
                r_new = Ax_new - p.b
                bound = fz + np.dot(grad, diff) + 0.5 * L * np.dot(diff, diff)
                if 0.5 * np.dot(r_new, r_new) <= bound + 1e-12 * max(1.0, abs(bound)):
                    break
                L *= cfg.backtrack_up

            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            beta = (t - 1.0) / t_new
            z = x_new + beta * (x_new - x)
            Az = Ax_new + beta * (Ax_new - Ax)
            x, Ax, t = x_new, Ax_new, t_new
            k += 1

            if k % cfg.check_every == 0 or k == cfg.max_iters:
                self._check_finite({"k": k, "L": L}, x)
                y = Ax - p.b
                eta_G, eta_D = self._measures(x, y, p, lam)
                history.append(TraceRecord(iteration=k, eta_G=eta_G, eta_D=eta_D, sigma=L))
                logger.debug("APG iter %d: L=%.3e eta_G=%.3e eta_D=%.3e", k, L, eta_G, eta_D)
                if self._terminated(eta_G, eta_D):
                    break

        return self._report(p, lam, x, Ax - p.b, outer_iters=k, started=started, history=history)


def apg_solve(p: ProblemData, lam: LambdaSeq, cfg: ApgConfig = ApgConfig(),
              warm: Optional[np.ndarray] = None) -> SolveReport:
    """Runs :class:`ApgSolver` with ``cfg``; see :meth:`ApgSolver.solve`."""
    return ApgSolver(cfg).solve(p, lam, warm)
