from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from ..models.errors import ValidationError
from ..models.problem import ProblemData, oscar_weights, oscar_weights_from_factor
from ..models.report import Algorithm
from ..solvers import make_solver
from ..utils.logging import logger


@dataclass
class ComparisonRow:
    """
    Outcome of one algorithm on one ``(instance, factor)`` pair.

    :ivar instance: Label of the instance.
    :type instance: str
    :ivar factor: Weight factor ``a`` with ``w1 = a ||A^T b||_inf``.
    :type factor: float
    :ivar algorithm: Solver that produced the row.
    :type algorithm: Algorithm
    :ivar iterations: Outer iterations (ALM) or iterations (APG/ADMM).
    :type iterations: int
    :ivar inner_iters: Newton iterations over all subproblems (ALM only).
    :type inner_iters: int
    """
    instance: str
    factor: float
    algorithm: Algorithm
    w1: float
    w2: float
    converged: bool
    obj_primal: float
    eta_G: float
    eta_D: float
    eta_kkt: float
    nnz999: int
    iterations: int
    inner_iters: int
    wall_ms: float


def compare_solvers(p: ProblemData, factors: Sequence[float], algorithms: Sequence[Algorithm],
                    configs: Optional[Dict[Algorithm, Any]] = None, instance: str = "instance") -> List[ComparisonRow]:
    """
    Runs every algorithm at every weight factor of the scheme
    ``w1 = a ||A^T b||_inf``, ``w2 = w1 / sqrt(n)`` and tabulates size of the
    support, accuracy, iterations and time.

    :param p: Problem instance.
    :type p: ProblemData
    :param factors: Positive weight factors ``a``.
    :type factors: Sequence[float]
    :param algorithms: Solvers to compare.
    :type algorithms: Sequence[Algorithm]
    :param configs: Per-algorithm configurations; defaults otherwise.
    :type configs: Optional[Dict[Algorithm, Any]]
    :param instance: Label written into every row.
    :type instance: str
    :return: One row per ``(factor, algorithm)``, factors in the given order.
    :rtype: List[ComparisonRow]
    """
    if not factors or not algorithms:
        raise ValidationError("need at least one factor and one algorithm")
    configs = configs or {}
    rows = []
    for a in factors:
        w1, w2 = oscar_weights_from_factor(a, p)
        lam = oscar_weights(w1, w2, p.n)
        for algorithm in algorithms:
            report = make_solver(algorithm, configs.get(algorithm)).solve(p, lam)
            rows.append(ComparisonRow(
                instance=instance, factor=float(a), algorithm=algorithm, w1=w1, w2=w2,
                converged=report.converged, obj_primal=report.obj_primal,
                eta_G=report.eta_G, eta_D=report.eta_D, eta_kkt=report.eta_kkt, nnz999=report.nnz999,
                iterations=report.outer_iters, inner_iters=report.inner_iters_total, wall_ms=report.wall_ms))
            logger.info("%s a=%g %s: converged=%s nnz=%d time=%.1f ms", instance, a, algorithm.value,
                        report.converged, report.nnz999, report.wall_ms)
    return rows


def performance_profile(rows: Iterable[ComparisonRow],
                        taus: Sequence[float]) -> List[Tuple[Algorithm, float, float]]:
    """
    Performance profile over the ``(instance, factor)`` problems in ``rows``:
    for every algorithm and ratio ``tau``, the fraction of problems it solved
    within ``tau`` times the time of the fastest converged run. Failed runs
    never count as solved; problems nobody solved stay in the denominator.

    :param rows: Comparison results.
    :type rows: Iterable[ComparisonRow]
    :param taus: Time ratios, each at least 1.
    :type taus: Sequence[float]
    :return: ``(algorithm, tau, fraction)`` triples, algorithms in first-seen order.
    :rtype: List[Tuple[Algorithm, float, float]]
    """
    if any(tau < 1 for tau in taus):
        raise ValidationError("performance ratios start at 1")
    rows = list(rows)
    best: Dict[Tuple[str, float], float] = {}
    times: Dict[Algorithm, Dict[Tuple[str, float], float]] = {}
    for row in rows:
        key = (row.instance, row.factor)
        best.setdefault(key, float("inf"))
        times.setdefault(row.algorithm, {})
        if row.converged:
            # Floor at clock resolution
            elapsed = max(row.wall_ms, 1e-6)
            times[row.algorithm][key] = elapsed
            best[key] = min(best[key], elapsed)

    profile = []
    for algorithm, solved in times.items():
        for tau in taus:
            hits = sum(1 for key, elapsed in solved.items() if elapsed <= tau * best[key])
            profile.append((algorithm, float(tau), hits / len(best) if best else 0.0))
    return profile
