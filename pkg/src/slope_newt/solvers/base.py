import time
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..models.errors import NumericalError, ValidationError
from ..models.metrics import (dual_infeasibility, dual_objective, kkt_residual, nnz999, primal_objective,
                              relative_duality_gap)
from ..models.problem import LambdaSeq, ProblemData
from ..models.report import Algorithm, SolveReport, TraceRecord
from ..utils.logging import logger


class Solver(ABC):
    """
    Abstract base class of the SLOPE solvers.

    A solver takes an immutable :class:`ProblemData` and a weight sequence and
    returns a :class:`SolveReport`. Concrete implementations provide the
    iteration itself; the base class owns the shared pieces: argument checks,
    the termination rule ``eta_G <= tol_G and eta_D <= tol_D``, NaN detection
    and the assembly of the final report with every accuracy measure.

    Instances hold only their configuration, so one solver may serve several
    concurrent solves on shared problem data.

    :ivar config: Algorithm parameters; must expose ``tol_G`` and ``tol_D``.
    :type config: Any
    """

    algorithm: Algorithm

    def __init__(self, config: Any):
        self.config = config

    @abstractmethod
    def solve(self, p: ProblemData, lam: LambdaSeq, warm: Optional[Tuple] = None) -> SolveReport:
        """
        Runs the algorithm until the termination rule holds or the iteration
        budget is spent.

        :param p: Problem instance.
        :type p: ProblemData
        :param lam: Penalty weights, ``len(lam) == p.n``.
        :type lam: LambdaSeq
        :param warm: Optional starting point; its layout depends on the solver.
        :type warm: Optional[Tuple]
        :return: The final report, with ``converged=False`` when the budget ran out.
        :rtype: SolveReport
        """
        pass

    @staticmethod
    def _check_problem(p: ProblemData, lam: LambdaSeq):
        if len(lam) != p.n:
            raise ValidationError(f"weight sequence has {len(lam)} entries, expected n={p.n}")

    @staticmethod
    def _start_vector(v: Optional[np.ndarray], size: int, name: str) -> np.ndarray:
        if v is None:
            return np.zeros(size)
        v = np.array(v, dtype=np.float64).reshape(-1)
        if v.shape[0] != size:
            raise ValidationError(f"warm start {name} has {v.shape[0]} entries, expected {size}")
        return v

    @staticmethod
    def _check_finite(state: Dict[str, Any], *arrays: np.ndarray):
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise NumericalError("non-finite value in iterate", state)

    def _measures(self, x: np.ndarray, y: np.ndarray, p: ProblemData, lam: LambdaSeq) -> Tuple[float, float]:
        return relative_duality_gap(x, y, p, lam), dual_infeasibility(x, p, lam)

    def _terminated(self, eta_G: float, eta_D: float) -> bool:
        return eta_G <= self.config.tol_G and eta_D <= self.config.tol_D

    def _report(self, p: ProblemData, lam: LambdaSeq, x: np.ndarray, y: np.ndarray, *,
                outer_iters: int, started: float, history: List[TraceRecord],
                inner_iters_total: int = 0, linear_solve_iters: int = 0) -> SolveReport:
        eta_G, eta_D = self._measures(x, y, p, lam)
        converged = self._terminated(eta_G, eta_D)
        report = SolveReport(
            x=x, y=y,
            obj_primal=primal_objective(x, p, lam),
            obj_dual=dual_objective(y, p),
            eta_G=eta_G, eta_D=eta_D,
            eta_kkt=kkt_residual(x, p, lam),
            nnz999=nnz999(x),
            outer_iters=outer_iters,
            inner_iters_total=inner_iters_total,
            wall_ms=(time.perf_counter() - started) * 1000.0,
            algorithm=self.algorithm,
            converged=converged,
            tol_G=self.config.tol_G, tol_D=self.config.tol_D,
            linear_solve_iters=linear_solve_iters,
            history=history)
        log = logger.info if converged else logger.warning
        log("%s %s after %d iterations: obj=%.10e eta_G=%.2e eta_D=%.2e eta=%.2e (%.1f ms)",
            self.algorithm.value, "converged" if converged else "stopped", outer_iters,
            report.obj_primal, eta_G, eta_D, report.eta_kkt, report.wall_ms)
        return report
