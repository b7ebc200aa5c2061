from typing import Any, Optional

from ..models.report import Algorithm
from .admm import AdmmConfig, AdmmSolver, admm_solve
from .alm import AlmConfig, AlmSolver, alm_solve
from .apg import ApgConfig, ApgSolver, apg_solve
from .base import Solver

SOLVERS = {
    Algorithm.NEWT_ALM: (AlmSolver, AlmConfig),
    Algorithm.ADMM: (AdmmSolver, AdmmConfig),
    Algorithm.APG: (ApgSolver, ApgConfig),
}


def make_solver(algorithm: Algorithm, config: Optional[Any] = None) -> Solver:
    """Instantiates the solver registered for ``algorithm``, with its default configuration unless given."""
    solver_cls, config_cls = SOLVERS[algorithm]
    return solver_cls(config if config is not None else config_cls())
