from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, List, Optional, Tuple

import numpy as np

from ..models.errors import NumericalError, StagnationError, ValidationError
from ..models.metrics import (dual_infeasibility, dual_objective, kkt_residual, nnz999, primal_objective,
                              relative_duality_gap)
from ..models.problem import ProblemData, lambda_max, oscar_weights
from ..models.report import Algorithm, SolveReport
from ..solvers import make_solver
from ..utils.config import thread_cap
from ..utils.logging import logger


class Spacing(Enum):
    LIN = "lin"
    LOG = "log"


class W2Rule(Enum):
    """
    How ``w2`` is chosen at each grid point.

    :ivar FIXED: One absolute value for the whole sweep.
    :ivar SCALED: ``w2 = w1 / sqrt(n)`` at every point.
    :ivar GRID: A second grid axis; the sweep is row-major over ``(w2, w1)``.
    """
    FIXED = "fixed"
    SCALED = "scaled"
    GRID = "grid"


def _spaced(lo: float, hi: float, count: int, spacing: Spacing) -> np.ndarray:
    if count < 1:
        raise ValidationError(f"grid count must be positive, got {count}")
    if lo < 0 or hi < lo:
        raise ValidationError(f"grid bounds must satisfy 0 <= lo <= hi, got [{lo}, {hi}]")
    if spacing == Spacing.LOG:
        if lo <= 0:
            raise ValidationError("log spacing needs a positive lower bound")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


@dataclass(frozen=True, eq=False)
class PathGrid:
    """
    A grid of OSCAR weight pairs.

    :ivar w1_values: Absolute ``w1`` values; swept largest first.
    :type w1_values: np.ndarray
    :ivar w2_rule: How ``w2`` is chosen.
    :type w2_rule: W2Rule
    :ivar w2_values: The fixed value (``FIXED``) or the axis (``GRID``);
        empty for ``SCALED``.
    :type w2_values: np.ndarray
    :ivar top_k: Number of leading coefficients reported per point.
    :type top_k: int
    :ivar warm_start: Chain each solve from the previous solution.
    :type warm_start: bool
    """
    w1_values: np.ndarray
    w2_rule: W2Rule
    w2_values: np.ndarray = field(default_factory=lambda: np.empty(0))
    top_k: int = 10
    warm_start: bool = True

    def __post_init__(self):
        w1 = np.sort(np.asarray(self.w1_values, dtype=np.float64).reshape(-1))[::-1]
        w2 = np.asarray(self.w2_values, dtype=np.float64).reshape(-1)
        if w1.size == 0:
            raise ValidationError("w1 grid is empty")
        if np.any(w1 < 0) or np.any(w2 < 0) or not np.all(np.isfinite(w1)) or not np.all(np.isfinite(w2)):
            raise ValidationError("grid values must be finite and nonnegative")
        if self.w2_rule == W2Rule.FIXED and w2.size != 1:
            raise ValidationError("a fixed w2 rule takes exactly one value")
        if self.w2_rule == W2Rule.GRID and w2.size == 0:
            raise ValidationError("w2 grid is empty")
        if self.top_k < 0:
            raise ValidationError(f"top_k must be nonnegative, got {self.top_k}")
        object.__setattr__(self, "w1_values", w1)
        object.__setattr__(self, "w2_values", w2)
        if self.w2_rule != W2Rule.SCALED and w1[-1] + w2.min() <= 0:
            raise ValidationError("w1 + w2 must be positive at every grid point")
        if self.w2_rule == W2Rule.SCALED and w1[-1] <= 0:
            raise ValidationError("w1 must be positive at every point of a scaled grid")

    def rows(self, n: int) -> List[List[Tuple[float, float]]]:
        """Grid points grouped by ``w2`` row, each row in decreasing ``w1``."""
        if self.w2_rule == W2Rule.SCALED:
            return [[(float(w1), float(w1 / np.sqrt(n))) for w1 in self.w1_values]]
        return [[(float(w1), float(w2)) for w1 in self.w1_values] for w2 in self.w2_values]

    def points(self, n: int) -> List[Tuple[float, float]]:
        return [point for row in self.rows(n) for point in row]

    @classmethod
    def from_spec(cls, p: ProblemData, w1_grid: str, w2_rule: str = "scaled", top_k: int = 10,
                  warm_start: bool = True) -> "PathGrid":
        """
        Builds a grid from command-line specs.

        ``w1_grid`` is ``lo:hi:count[:lin|log]`` in units of ``||A^T b||_inf``
        (log spacing by default). ``w2_rule`` is one of ``fixed:F`` (absolute
        value), ``fixed:auto`` (``||A^T b||_inf / n^2``), ``scaled``
        (``w1 / sqrt(n)``) or ``grid:lo:hi:count`` in units of
        ``||A^T b||_inf / n``, spaced like the ``w1`` grid.

        :raises ValidationError: On a malformed spec.
        """
        scale = lambda_max(p)
        parts = w1_grid.split(":")
        if len(parts) not in (3, 4):
            raise ValidationError(f"w1 grid must be lo:hi:count[:lin|log], got {w1_grid!r}")
        try:
            lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
            spacing = Spacing(parts[3]) if len(parts) == 4 else Spacing.LOG
        except ValueError:
            raise ValidationError(f"malformed w1 grid {w1_grid!r}") from None
        w1 = scale * _spaced(lo, hi, count, spacing)

        kind, _, rest = w2_rule.partition(":")
        try:
            rule = W2Rule(kind)
            if rule == W2Rule.FIXED:
                w2 = [scale / p.n ** 2] if rest == "auto" else [float(rest)]
            elif rule == W2Rule.GRID:
                lo2, hi2, count2 = rest.split(":")
                w2 = scale / p.n * _spaced(float(lo2), float(hi2), int(count2), spacing)
            else:
                w2 = []
        except ValueError:
            raise ValidationError(f"malformed w2 rule {w2_rule!r}") from None
        return cls(w1, rule, np.asarray(w2, dtype=np.float64), top_k, warm_start)


@dataclass
class PathPoint:
    """
    One grid point together with its leading coefficients. ``error`` holds the
    message of a solver failure; the report of a failed point is evaluated at
    the origin and has ``converged=False``.
    """
    w1: float
    w2: float
    report: SolveReport
    top_k: List[Tuple[int, float]]
    error: Optional[str] = None


def warm_start_from(report: SolveReport, p: ProblemData) -> Any:
    """The warm-start argument the report's algorithm expects, built from its solution."""
    if report.algorithm == Algorithm.NEWT_ALM:
        return report.x, report.y
    if report.algorithm == Algorithm.ADMM:
        return report.y, -p.rmatvec(report.y), report.x
    return report.x


def _failed_report(p: ProblemData, algorithm: Algorithm, config: Any, w1: float, w2: float) -> SolveReport:
    lam = oscar_weights(w1, w2, p.n)
    tol = make_solver(algorithm, config).config
    x, y = np.zeros(p.n), np.zeros(p.m)
    return SolveReport(
        x=x, y=y,
        obj_primal=primal_objective(x, p, lam), obj_dual=dual_objective(y, p),
        eta_G=relative_duality_gap(x, y, p, lam), eta_D=dual_infeasibility(x, p, lam),
        eta_kkt=kkt_residual(x, p, lam), nnz999=nnz999(x),
        outer_iters=0, inner_iters_total=0, wall_ms=0.0,
        algorithm=algorithm, converged=False, tol_G=tol.tol_G, tol_D=tol.tol_D)


def _solve_point(p: ProblemData, algorithm: Algorithm, config: Any, w1: float, w2: float,
                 top_k: int, warm: Any = None) -> PathPoint:
    try:
        report = make_solver(algorithm, config).solve(p, oscar_weights(w1, w2, p.n), warm)
    except (StagnationError, NumericalError) as e:
        logger.warning("solve failed at w1=%.6e w2=%.6e: %s", w1, w2, e)
        return PathPoint(w1, w2, _failed_report(p, algorithm, config, w1, w2), [], str(e))
    return PathPoint(w1, w2, report, report.top_k(top_k))

def run_path(p: ProblemData, grid: PathGrid, algorithm: Algorithm = Algorithm.NEWT_ALM,
             config: Optional[Any] = None, workers: Optional[int] = None) -> List[PathPoint]:
    """
    Solves every point of ``grid``, largest ``w1`` first within each ``w2`` row.

    With warm starts the sweep is sequential and each solve starts from the
    previous solution of the same row (the first point of a row starts from
    zero). Without warm starts the points are independent and are spread
    over a thread pool of at most ``workers`` threads, capped by
    ``SLOPE_NEWT_THREADS``. Non-converged points are kept with
    ``converged=False``, and a point whose solver raises
    :class:`StagnationError` or :class:`NumericalError` is recorded as failed
    without ending the sweep; the next warm start then comes from the last
    successful point.

    :param p: Problem instance.
    :type p: ProblemData
    :param grid: Weight grid.
    :type grid: PathGrid
    :param algorithm: Solver used at every point.
    :type algorithm: Algorithm
    :param config: Solver configuration; defaults of the solver when ``None``.
    :type config: Optional[Any]
    :param workers: Requested pool size for cold sweeps.
    :type workers: Optional[int]
    :return: Results in sweep order.
    :rtype: List[PathPoint]
    """
    results: List[PathPoint] = []
    if grid.warm_start:
        for row in grid.rows(p.n):
            warm = None
            for w1, w2 in row:
                point = _solve_point(p, algorithm, config, w1, w2, grid.top_k, warm)
                if point.error is None:
                    warm = warm_start_from(point.report, p)
                results.append(point)
    else:
        pool_size = max(1, min(workers or thread_cap(), thread_cap()))
        with ThreadPoolExecutor(max_workers=pool_size) as pool:
            futures = [pool.submit(_solve_point, p, algorithm, config, w1, w2, grid.top_k)
                       for w1, w2 in grid.points(p.n)]
            results = [future.result() for future in futures]

    failed = sum(not point.report.converged for point in results)
    logger.info("Path of %d points done (%s, warm=%s): %d not converged",
                len(results), algorithm.value, grid.warm_start, failed)
    return results


def support_monotonicity(points: List[PathPoint]) -> float:
    """
    Fraction of consecutive points along the sweep whose ``nnz999`` does not
    decrease; ``1.0`` for paths with fewer than two points.
    """
    sizes = [point.report.nnz999 for point in points]
    if len(sizes) < 2:
        return 1.0
    return float(np.mean([b >= a for a, b in zip(sizes, sizes[1:])]))
