import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List

import numpy as np

from .errors import ValidationError


class Algorithm(Enum):
    """
    Solvers available to the library and the command line.

    :ivar NEWT_ALM: Semismooth Newton augmented Lagrangian method on the dual.
    :ivar ADMM: Dual ADMM with exact subproblems.
    :ivar APG: Accelerated proximal gradient on the primal.
    """
    NEWT_ALM = "newt-alm"
    ADMM = "admm"
    APG = "apg"


@dataclass
class TraceRecord:
    """
    One row of a solver trace. Fields a solver does not track stay ``nan``.

    :ivar iteration: Outer iteration (ALM) or iteration counter (APG/ADMM).
    :type iteration: int
    :ivar eta_G: Relative duality gap after the iteration.
    :type eta_G: float
    :ivar eta_D: Dual infeasibility after the iteration.
    :type eta_D: float
    :ivar sigma: Penalty parameter (ALM/ADMM) or step constant ``L`` (APG).
    :type sigma: float
    :ivar grad_norm: ``||grad Psi_k(y^{k+1})||`` (ALM).
    :type grad_norm: float
    :ivar dx_norm: ``||x^{k+1} - x^k||``.
    :type dx_norm: float
    :ivar inner_iters: Newton iterations spent in the subproblem (ALM).
    :type inner_iters: int
    :ivar feasibility: ``||A^T y + xi||`` (ADMM).
    :type feasibility: float
    :ivar obj_primal: Primal objective at the committed iterate (ALM).
    :type obj_primal: float
    """
    iteration: int
    eta_G: float
    eta_D: float
    sigma: float = math.nan
    grad_norm: float = math.nan
    dx_norm: float = math.nan
    inner_iters: int = 0
    feasibility: float = math.nan
    obj_primal: float = math.nan

    def as_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class SolveReport:
    """
    Outcome of a single solve.

    :ivar x: Primal solution (length ``n``).
    :type x: np.ndarray
    :ivar y: Dual solution (length ``m``).
    :type y: np.ndarray
    :ivar obj_primal: Primal objective at ``x``.
    :type obj_primal: float
    :ivar obj_dual: Dual objective at ``y``.
    :type obj_dual: float
    :ivar eta_G: Relative duality gap.
    :type eta_G: float
    :ivar eta_D: Dual infeasibility.
    :type eta_D: float
    :ivar eta_kkt: Relative KKT residual.
    :type eta_kkt: float
    :ivar nnz999: 99.9% l1-mass support size of ``x``.
    :type nnz999: int
    :ivar outer_iters: Outer (ALM) or total (APG/ADMM) iterations.
    :type outer_iters: int
    :ivar inner_iters_total: Newton iterations over all subproblems (ALM; 0 otherwise).
    :type inner_iters_total: int
    :ivar wall_ms: Wall-clock time of the solve in milliseconds.
    :type wall_ms: float
    :ivar algorithm: Solver that produced the report.
    :type algorithm: Algorithm
    :ivar converged: Whether the termination rule was met.
    :type converged: bool
    :ivar tol_G: Gap tolerance the run was configured with.
    :type tol_G: float
    :ivar tol_D: Infeasibility tolerance the run was configured with.
    :type tol_D: float
    :ivar linear_solve_iters: CG iterations, counting a direct solve as one.
    :type linear_solve_iters: int
    :ivar history: Per-iteration trace.
    :type history: List[TraceRecord]
    """
    x: np.ndarray
    y: np.ndarray
    obj_primal: float
    obj_dual: float
    eta_G: float
    eta_D: float
    eta_kkt: float
    nnz999: int
    outer_iters: int
    inner_iters_total: int
    wall_ms: float
    algorithm: Algorithm
    converged: bool
    tol_G: float
    tol_D: float
    linear_solve_iters: int = 0
    history: List[TraceRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.converged and (self.eta_G > self.tol_G or self.eta_D > self.tol_D):
            raise ValidationError(
                f"report marked converged with eta_G={self.eta_G:.3e}, eta_D={self.eta_D:.3e} "
                f"above tolerances ({self.tol_G:.1e}, {self.tol_D:.1e})")
        if min(self.eta_G, self.eta_D, self.eta_kkt, self.wall_ms) < 0:
            raise ValidationError("accuracy measures and wall time must be nonnegative")

    def summary(self) -> Dict[str, Any]:
        """Scalar fields only, in a stable order (used for JSON and CSV output)."""
        return {
            "algorithm": self.algorithm.value,
            "converged": self.converged,
            "obj_primal": self.obj_primal,
            "obj_dual": self.obj_dual,
            "eta_G": self.eta_G,
            "eta_D": self.eta_D,
            "eta_kkt": self.eta_kkt,
            "nnz999": self.nnz999,
            "outer_iters": self.outer_iters,
            "inner_iters_total": self.inner_iters_total,
            "linear_solve_iters": self.linear_solve_iters,
            "wall_ms": self.wall_ms,
        }

    def top_k(self, k: int) -> List[tuple]:
        """
        The ``k`` largest coefficients by magnitude as ``(index, value)`` pairs;
        ties keep the smaller index first.
        """
        order = np.argsort(-np.abs(self.x), kind="stable")[:k]
        return [(int(i), float(self.x[i])) for i in order]
