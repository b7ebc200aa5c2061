from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse.linalg import LinearOperator, cg

from ..models.errors import ValidationError
from ..models.problem import ProblemData
from ..utils.logging import logger
from .sorted_prox import ProxResult, SignedPermutation, SortedSolution, difference_matrix


class RunType(Enum):
    """
    Type of a maximal run of consecutive rows of ``B`` in the active set:
    ``ONE`` runs are active (identity block of the selector), ``ZERO`` runs are
    inactive.
    """
    ZERO = "ZERO"
    ONE = "ONE"


class Strategy(Enum):
    """How the Newton system ``(I + sigma A M A^T) d = rhs`` is solved."""
    DENSE_CHOLESKY = "DENSE_CHOLESKY"
    SMW = "SMW"
    PCG = "PCG"


@dataclass(frozen=True, eq=False)
class BlockPartition:
    """
    The active rows ``Gamma`` of ``Bx >= 0`` and their run decomposition.

    :ivar gamma: Boolean mask over the ``n`` rows of ``B`` (0-based); row
        ``n - 1`` is the nonnegativity row of the last coordinate.
    :type gamma: np.ndarray
    :ivar runs: Maximal runs ``(length, type)`` of consecutive rows, with
        alternating types.
    :type runs: Tuple[Tuple[int, RunType], ...]
    """
    gamma: np.ndarray
    runs: Tuple[Tuple[int, RunType], ...]

    def __post_init__(self):
        gamma = np.asarray(self.gamma, dtype=bool).reshape(-1)
        if gamma.size == 0:
            raise ValidationError("partition over an empty index set")
        if sum(length for length, _ in self.runs) != gamma.shape[0]:
            raise ValidationError("run lengths do not add up to n")
        for (len_a, type_a), (_, type_b) in zip(self.runs, self.runs[1:]):
            if type_a == type_b:
                raise ValidationError("consecutive runs share a type")
        if any(length < 1 for length, _ in self.runs):
            raise ValidationError("runs must be non-empty")
        rebuilt = np.concatenate([np.full(length, kind == RunType.ONE) for length, kind in self.runs])
        if not np.array_equal(rebuilt, gamma):
            raise ValidationError("runs do not reproduce the active set")
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_gamma(cls, gamma: np.ndarray) -> "BlockPartition":
        gamma = np.asarray(gamma, dtype=bool).reshape(-1)
        cuts = np.flatnonzero(gamma[1:] != gamma[:-1]) + 1
        edges = np.concatenate(([0], cuts, [gamma.shape[0]]))
        runs = tuple((int(e - s), RunType.ONE if gamma[s] else RunType.ZERO)
                     for s, e in zip(edges[:-1], edges[1:]))
        return cls(gamma, runs)

    @property
    def n(self) -> int:
        return self.gamma.shape[0]

    @property
    def N(self) -> int:
        return len(self.runs)

    @property
    def J(self) -> Tuple[int, ...]:
        """0-based indices of the active (``ONE``) runs."""
        return tuple(i for i, (_, kind) in enumerate(self.runs) if kind == RunType.ONE)

    @property
    def active_rows(self) -> np.ndarray:
        return np.flatnonzero(self.gamma)


class UBlock(NamedTuple):
    start: int
    end: int
    scale: float


@dataclass(frozen=True, eq=False)
class JacobianFactors:
    """
    One element ``M = pi^{-1} (H + U U^T) pi`` of the generalized Jacobian of
    the sorted-l1 prox. ``H`` is a 0/1 diagonal and every row of ``U`` holds at
    most one nonzero, so products with ``M`` cost ``O(n)``.

    :ivar pi: Signed sort of the prox argument.
    :type pi: SignedPermutation
    :ivar h_diag: Diagonal of ``H`` in sorted coordinates.
    :type h_diag: np.ndarray
    :ivar u_blocks: Contiguous sorted-coordinate ranges ``[start, end]`` with
        the common value ``scale`` of the matching column of ``U``.
    :type u_blocks: Tuple[UBlock, ...]
    """
    pi: SignedPermutation
    h_diag: np.ndarray
    u_blocks: Tuple[UBlock, ...]

    @property
    def n(self) -> int:
        return self.h_diag.shape[0]

    @property
    def alpha(self) -> np.ndarray:
        """Sorted coordinates with ``H_ii = 1``."""
        return np.flatnonzero(self.h_diag)

    @property
    def r1(self) -> int:
        return int(np.count_nonzero(self.h_diag))

    @property
    def r2(self) -> int:
        return len(self.u_blocks)

    def sorted_projector(self) -> np.ndarray:
        """Dense ``H + U U^T`` (tests and small problems only)."""
        P = np.diag(self.h_diag.astype(np.float64))
        for start, end, scale in self.u_blocks:
            P[start:end + 1, start:end + 1] += scale * scale
        return P

    def dense(self) -> np.ndarray:
        """Dense ``M = pi^T (H + U U^T) pi`` in original coordinates."""
        n = self.n
        Pi = np.zeros((n, n))
        Pi[np.arange(n), self.pi.perm] = self.pi.signs
        return Pi.T @ self.sorted_projector() @ Pi

    def selection_matrix(self) -> sp.csc_matrix:
        """
        Sparse ``n x (r1 + r2)`` matrix ``Q`` with ``A Q = [V1 V2]``: one signed
        unit column per ``H`` entry, then one scaled signed indicator per
        ``U`` block, all expressed in original coordinates.
        """
        perm, signs = self.pi.perm, self.pi.signs
        alpha = self.alpha
        rows = [perm[alpha]]
        cols = [np.arange(alpha.shape[0])]
        vals = [signs[alpha]]
        for j, (start, end, scale) in enumerate(self.u_blocks):
            span = np.arange(start, end + 1)
            rows.append(perm[span])
            cols.append(np.full(span.shape[0], alpha.shape[0] + j))
            vals.append(signs[span] * scale)
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n, self.r1 + self.r2))


def active_partition(prox: ProxResult) -> BlockPartition:
    """
    Reads the maximal admissible active set ``Gamma = {i : (B x_lambda)_i = 0}``
    off the run structure of a prox result: difference rows inside a run (or
    between runs of equal value) are active and the last row is active when
    the smallest value is zero.

    :param prox: Result of :func:`prox_sorted_l1` or :func:`prox_scaled`.
    :type prox: ProxResult
    :return: The partition of the rows of ``B``.
    :rtype: BlockPartition
    """
    solution: SortedSolution = prox.sorted
    xs = solution.x
    gamma = np.append(xs[:-1] == xs[1:], xs[-1] == 0.0)
    return BlockPartition.from_gamma(gamma)


def jacobian_factors(part: BlockPartition, pi: SignedPermutation) -> JacobianFactors:
    """
    Builds ``H`` and ``U`` with ``H + U U^T = I - B_G^T (B_G B_G^T)^{-1} B_G``.

    Runs are walked in order. An active run that is not the last one links
    ``n_i + 1`` coordinates (it absorbs the first coordinate of the following
    inactive run) and contributes one ``U`` column of value
    ``1/sqrt(n_i + 1)``. The last run, when active, contains the
    nonnegativity row and pins its ``n_N`` coordinates to zero. An inactive
    run contributes ``n_i - 1`` identity entries, or ``n_1`` for the first run.

    :param part: Active-set partition.
    :type part: BlockPartition
    :param pi: Signed permutation of the prox argument.
    :type pi: SignedPermutation
    :return: The factored Jacobian element.
    :rtype: JacobianFactors
    :raises ValidationError: If the partition and permutation disagree on ``n``.
    """
    n = part.n
    if len(pi) != n:
        raise ValidationError(f"partition has n={n} rows but permutation has {len(pi)} entries")

    h_diag = np.zeros(n, dtype=np.int8)
    u_blocks = []
    coord = 0
    last = part.N - 1
    active = set(part.J)
    for i, (length, _) in enumerate(part.runs):
        if i in active:
            if i != last:
                size = length + 1
                u_blocks.append(UBlock(coord, coord + length, 1.0 / np.sqrt(size)))
            else:
                size = length
        else:
            size = length if i == 0 else length - 1
            h_diag[coord:coord + size] = 1
        coord += size

    if coord != n:
        raise ValidationError(f"inconsistent partition: covered {coord} of {n} coordinates")
    return JacobianFactors(pi, h_diag, tuple(u_blocks))


def m_matvec(f: JacobianFactors, v: np.ndarray) -> np.ndarray:
    """``M v = pi^{-1} (H + U U^T) (pi v)`` in ``O(n)``."""
    vs = f.pi.apply(np.asarray(v, dtype=np.float64))
    out = f.h_diag * vs
    for start, end, scale in f.u_blocks:
        out[start:end + 1] += scale * scale * vs[start:end + 1].sum()
    return f.pi.inverse(out)


def dense_projector(part: BlockPartition) -> np.ndarray:
    """Dense ``I - B_G^T (B_G B_G^T)^{-1} B_G`` for the partition's active rows."""
    n = part.n
    rows = part.active_rows
    if rows.size == 0:
        return np.eye(n)
    Bg = difference_matrix(n)[rows]
    return np.eye(n) - Bg.T @ np.linalg.solve(Bg @ Bg.T, Bg)


@dataclass(frozen=True)
class NewtonConfig:
    """
    Thresholds for picking the Newton-system strategy.

    :ivar direct_max_m: Largest ``m`` factored densely.
    :type direct_max_m: int
    :ivar smw_max_rank: Largest ``r1 + r2`` handled by the Woodbury identity.
    :type smw_max_rank: int
    :ivar cg_maxit: Iteration cap of preconditioned CG.
    :type cg_maxit: int
    """
    direct_max_m: int = 4000
    smw_max_rank: int = 2000
    cg_maxit: int = 500

    def __post_init__(self):
        if self.direct_max_m < 1 or self.smw_max_rank < 0 or self.cg_maxit < 1:
            raise ValidationError(f"invalid Newton configuration: {self}")


@dataclass(frozen=True, eq=False)
class NewtonOperator:
    """
    The symmetric positive definite operator ``V = I_m + sigma W W^T`` with
    ``W = [V1 V2] = A Q`` (see :meth:`JacobianFactors.selection_matrix`).

    :ivar sigma: Penalty parameter.
    :type sigma: float
    :ivar W: Dense ``m x (r1 + r2)`` factor.
    :type W: np.ndarray
    :ivar r1: Number of leading columns coming from ``H``.
    :type r1: int
    :ivar strategy: Solve strategy.
    :type strategy: Strategy
    :ivar factor: Cached Cholesky factor: of ``V`` for ``DENSE_CHOLESKY``, of
        ``I + sigma W^T W`` for ``SMW``.
    :type factor: Optional[tuple]
    """
    sigma: float
    W: np.ndarray
    r1: int
    strategy: Strategy
    factor: Optional[tuple] = None

    def __post_init__(self):
        if self.sigma < 0:
            raise ValidationError(f"sigma must be nonnegative, got {self.sigma!r}")

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def V1(self) -> np.ndarray:
        return self.W[:, :self.r1]

    @property
    def V2(self) -> np.ndarray:
        return self.W[:, self.r1:]

    @property
    def rank(self) -> int:
        return self.W.shape[1]

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.rank == 0:
            return np.array(v, dtype=np.float64)
        return v + self.sigma * (self.W @ (self.W.T @ v))

    def diagonal(self) -> np.ndarray:
        row_sq = np.einsum("ij,ij->i", self.V1, self.V1) + np.einsum("ij,ij->i", self.V2, self.V2)
        return 1.0 + self.sigma * row_sq

    def dense(self) -> np.ndarray:
        return np.eye(self.m) + self.sigma * (self.W @ self.W.T)


def _select_strategy(m: int, rank: int, cfg: NewtonConfig) -> Strategy:
    if m <= cfg.direct_max_m and rank >= m / 2:
        return Strategy.DENSE_CHOLESKY
    if rank < m / 2 and rank <= cfg.smw_max_rank:
        return Strategy.SMW
    return Strategy.PCG


def _factorize(sigma: float, W: np.ndarray, strategy: Strategy) -> Optional[tuple]:
    if strategy == Strategy.DENSE_CHOLESKY:
        return cho_factor(np.eye(W.shape[0]) + sigma * (W @ W.T), lower=True, check_finite=False)
    if strategy == Strategy.SMW and W.shape[1] > 0:
        return cho_factor(np.eye(W.shape[1]) + sigma * (W.T @ W), lower=True, check_finite=False)
    return None


def assemble_newton_operator(p: ProblemData, f: JacobianFactors, sigma: float,
                             strategy_hint: Optional[Strategy] = None,
                             cfg: NewtonConfig = NewtonConfig()) -> NewtonOperator:
    """
    Materializes ``V1`` (columns of the signed-permuted ``A`` selected by
    ``H``) and ``V2`` (one scaled sum of signed columns per ``U`` block), picks
    a strategy and caches its factorization.

    Without a hint the strategy is ``DENSE_CHOLESKY`` when ``m`` is small and
    the rank is at least ``m/2``, ``SMW`` when the rank is below ``m/2`` and
    within ``cfg.smw_max_rank``, and ``PCG`` otherwise. A failed Cholesky
    downgrades to ``PCG``.

    :param p: Problem instance.
    :type p: ProblemData
    :param f: Jacobian factors at the current point.
    :type f: JacobianFactors
    :param sigma: Positive penalty parameter.
    :type sigma: float
    :param strategy_hint: Forces a strategy when given.
    :type strategy_hint: Optional[Strategy]
    :param cfg: Strategy thresholds.
    :type cfg: NewtonConfig
    :return: The assembled operator.
    :rtype: NewtonOperator
    :raises ValidationError: If ``sigma <= 0``.
    """
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma!r}")
    if f.r1 + f.r2 > 0:
        W = p.right_multiply(f.selection_matrix())
    else:
        W = np.zeros((p.m, 0))

    strategy = strategy_hint or _select_strategy(p.m, W.shape[1], cfg)
    try:
        factor = _factorize(sigma, W, strategy)
    except np.linalg.LinAlgError:
        logger.warning("Cholesky of the %s system failed (m=%d, rank=%d); using PCG",
                       strategy.value, p.m, W.shape[1])
        strategy, factor = Strategy.PCG, None
    return NewtonOperator(float(sigma), W, f.r1, strategy, factor)


class LinearSolveResult(NamedTuple):
    d: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool


def solve_newton_system(op: NewtonOperator, rhs: np.ndarray, cg_tol: float,
                        cg_maxit: int = 500) -> LinearSolveResult:
    """
    Solves ``V d = rhs``.

    ``DENSE_CHOLESKY`` back-substitutes with the cached factor of ``V``;
    ``SMW`` applies ``d = rhs - sigma W (I + sigma W^T W)^{-1} W^T rhs``;
    ``PCG`` runs Jacobi-preconditioned conjugate gradients until the true
    residual is at most ``cg_tol`` or ``cg_maxit`` iterations have run, in
    which case the last iterate is returned with ``converged=False``.

    :param op: Assembled operator.
    :type op: NewtonOperator
    :param rhs: Right-hand side of length ``m``.
    :type rhs: np.ndarray
    :param cg_tol: Absolute residual target of PCG.
    :type cg_tol: float
    :param cg_maxit: Iteration cap of PCG.
    :type cg_maxit: int
    :return: Solution, true residual norm, iteration count (1 for direct
        solves) and convergence flag.
    :rtype: LinearSolveResult
    """
    rhs = np.asarray(rhs, dtype=np.float64).reshape(-1)
    if rhs.shape[0] != op.m:
        raise ValidationError(f"rhs has {rhs.shape[0]} entries, expected m={op.m}")

    if op.strategy == Strategy.DENSE_CHOLESKY and op.factor is not None:
        d = cho_solve(op.factor, rhs, check_finite=False)
        iterations = 1
    elif op.strategy == Strategy.SMW or op.rank == 0:
        if op.rank == 0:
            d = rhs.copy()
        else:
            d = rhs - op.sigma * (op.W @ cho_solve(op.factor, op.W.T @ rhs, check_finite=False))
        iterations = 1
    else:
        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        inv_diag = 1.0 / op.diagonal()
        V = LinearOperator((op.m, op.m), matvec=op.apply, dtype=np.float64)
        M = LinearOperator((op.m, op.m), matvec=lambda v: inv_diag * v, dtype=np.float64)
        d, _ = cg(V, rhs, rtol=0.0, atol=cg_tol, maxiter=cg_maxit, M=M, callback=count)

    residual = float(np.linalg.norm(op.apply(d) - rhs))
    converged = op.strategy != Strategy.PCG or residual <= cg_tol
    if not converged:
        logger.warning("PCG stopped after %d iterations with residual %.3e > %.3e",
                       iterations, residual, cg_tol)
    return LinearSolveResult(d, residual, iterations, converged)


def dense_newton_matrix(op: NewtonOperator) -> np.ndarray:
    """``I + sigma W W^T`` as a dense matrix; meant for small ``m``."""
    return op.dense()
