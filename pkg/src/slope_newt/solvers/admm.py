import math
import time
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from ..models.errors import ValidationError
from ..models.problem import LambdaSeq, ProblemData
from ..models.report import Algorithm, SolveReport, TraceRecord
from ..prox.sorted_prox import prox_scaled
from ..utils.logging import logger
from .base import Solver

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class AdmmConfig:
    """
    Parameters of the dual ADMM baseline.

    :ivar sigma: Penalty parameter, fixed during the run.
    :type sigma: float
    :ivar tau: Dual step length, in ``(0, (1 + sqrt 5) / 2)``.
    :type tau: float
    :ivar max_iters: Iteration cap.
    :type max_iters: int
    :ivar tol_G: Termination tolerance on the relative duality gap.
    :type tol_G: float
    :ivar tol_D: Termination tolerance on the dual infeasibility.
    :type tol_D: float
    :ivar direct_max_m: Largest ``m`` for which ``I + sigma A A^T`` is factored.
    :type direct_max_m: int
    :ivar cg_tol: Relative tolerance of the CG fallback.
    :type cg_tol: float
    :ivar check_every: The termination rule is evaluated every this many iterations.
    :type check_every: int
    """
    sigma: float = 1.0
    tau: float = 1.618
    max_iters: int = 50000
    tol_G: float = 1e-6
    tol_D: float = 1e-6
    direct_max_m: int = 4000
    cg_tol: float = 1e-12
    check_every: int = 1

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma!r}")
        if not 0 < self.tau < GOLDEN:
            raise ValidationError(f"tau must lie in (0, {GOLDEN:.6f}), got {self.tau!r}")
        if self.max_iters < 1 or self.check_every < 1:
            raise ValidationError("max_iters and check_every must be positive")
        if not (self.tol_G > 0 and self.tol_D > 0):
            raise ValidationError("tolerances must be positive")


def y_system(p: ProblemData, cfg: AdmmConfig) -> Callable[[np.ndarray], np.ndarray]:
    """Returns a solver of ``(I + sigma A A^T) y = rhs``, factored once when ``m`` allows it."""
    sigma = cfg.sigma
    if p.m <= cfg.direct_max_m:
        try:
            factor = cho_factor(np.eye(p.m) + sigma * p.gram(), lower=True, check_finite=False)
            return lambda rhs: cho_solve(factor, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            logger.warning("Cholesky of I + sigma A A^T failed (m=%d); using CG", p.m)

    G = LinearOperator((p.m, p.m), matvec=lambda v: v + sigma * p.matvec(p.rmatvec(v)), dtype=np.float64)

    def solve(rhs: np.ndarray) -> np.ndarray:
        y, info = cg(G, rhs, rtol=cfg.cg_tol, maxiter=10 * p.m)
        if info > 0:
            logger.warning("CG for the y-update stopped after %d iterations", info)
        return y

    return solve


def admm_iteration(p: ProblemData, lam: LambdaSeq, sigma: float, tau: float,
                   solve_y: Callable[[np.ndarray], np.ndarray], x: np.ndarray,
                   xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    One sweep ``y -> xi -> x`` of the dual ADMM.

    :return: The new ``(y, xi, x)`` and the constraint residual ``A^T y + xi``
        used in the multiplier update.
    :rtype: Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    """
    y = solve_y(p.matvec(x - sigma * xi) - p.b)
    Aty = p.rmatvec(y)
    w = x - sigma * Aty
    xi = (w - prox_scaled(w, sigma, lam).x) / sigma
    feasibility = Aty + xi
    return y, xi, x - tau * sigma * feasibility, feasibility


class AdmmSolver(Solver):
    """
    ADMM on the dual problem written as
    ``min 1/2 ||y||^2 + <b, y> + indicator(xi)`` subject to ``A^T y + xi = 0``,
    with the multiplier ``x`` being the primal solution.

    One iteration solves ``(I + sigma A A^T) y = A x - b - sigma A xi``, sets
    ``xi = (w - Prox_{sigma penalty}(w)) / sigma`` with ``w = x - sigma A^T y``
    and updates ``x <- x - tau sigma (A^T y + xi)``. Warm starts are
    ``(y0, xi0, x0)`` triples; entries may be ``None``.
    """
    algorithm = Algorithm.ADMM

    def __init__(self, config: AdmmConfig = AdmmConfig()):
        super().__init__(config)

    def solve(self, p: ProblemData, lam: LambdaSeq,
              warm: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray]]] = None
              ) -> SolveReport:
        started = time.perf_counter()
        self._check_problem(p, lam)
        cfg: AdmmConfig = self.config
        y0, xi0, x0 = warm if warm is not None else (None, None, None)
        y = self._start_vector(y0, p.m, "y0")
        xi = self._start_vector(xi0, p.n, "xi0")
        x = self._start_vector(x0, p.n, "x0")
        solve_y = y_system(p, cfg)
        sigma, tau = cfg.sigma, cfg.tau

        history = []
        k = 0
        while k < cfg.max_iters:
            y, xi, x, feasibility = admm_iteration(p, lam, sigma, tau, solve_y, x, xi)
            k += 1

            if k % cfg.check_every == 0 or k == cfg.max_iters:
                self._check_finite({"k": k, "sigma": sigma}, x, y, xi)
                eta_G, eta_D = self._measures(x, y, p, lam)
                history.append(TraceRecord(iteration=k, eta_G=eta_G, eta_D=eta_D, sigma=sigma,
                                           feasibility=float(np.linalg.norm(feasibility))))
                logger.debug("ADMM iter %d: ||A^T y + xi||=%.3e eta_G=%.3e eta_D=%.3e",
                             k, history[-1].feasibility, eta_G, eta_D)
                if self._terminated(eta_G, eta_D):
                    break

        return self._report(p, lam, x, y, outer_iters=k, started=started, history=history)


def admm_solve(p: ProblemData, lam: LambdaSeq, cfg: AdmmConfig = AdmmConfig(),
               warm: Optional[Tuple[Optional[np.ndarray], Optional[np.ndarray], Optional[np.ndarray]]] = None
               ) -> SolveReport:
    """Runs :class:`AdmmSolver` with ``cfg``; see :meth:`AdmmSolver.solve`."""
    return AdmmSolver(cfg).solve(p, lam, warm)
