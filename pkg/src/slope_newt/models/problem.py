from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError

Matrix = Union[np.ndarray, sp.csr_matrix]

# Sparse inputs denser than this are stored as dense arrays.
DENSE_FALLBACK_DENSITY = 0.25


@dataclass(frozen=True, eq=False)
class ProblemData:
    """
    A least-squares regression instance ``min 1/2 ||Ax - b||^2 + penalty(x)``.

    The design matrix is kept either as a dense row-major ``numpy`` array or
    as a ``scipy.sparse.csr_matrix`` with 64-bit indices. Sparse input whose
    density exceeds 25% is converted to dense on construction. Instances are
    immutable after construction and can be shared between solver runs.

    :ivar A: Design matrix of shape ``(m, n)``.
    :type A: Union[np.ndarray, sp.csr_matrix]
    :ivar b: Response vector of length ``m``.
    :type b: np.ndarray
    """
    A: Matrix
    b: np.ndarray

    def __post_init__(self):
        A = self.A
        if sp.issparse(A):
            A = sp.csr_matrix(A, dtype=np.float64, copy=True)
            if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
                raise ValidationError(f"design matrix must be 2-D and non-empty, got shape {A.shape}")
            density = A.nnz / float(A.shape[0] * A.shape[1])
            if density > DENSE_FALLBACK_DENSITY:
                A = A.toarray()
            else:
                A.sum_duplicates()
                A.indices = A.indices.astype(np.int64)
                A.indptr = A.indptr.astype(np.int64)
                if A.nnz and (A.indices.min() < 0 or A.indices.max() >= A.shape[1]):
                    raise ValidationError("sparse column index out of range")
                if not np.all(np.isfinite(A.data)):
                    raise ValidationError("design matrix contains NaN or Inf entries")
        if not sp.issparse(A):
            A = np.array(A, dtype=np.float64, order="C")
            if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
                raise ValidationError(f"design matrix must be 2-D and non-empty, got shape {A.shape}")
            if not np.all(np.isfinite(A)):
                raise ValidationError("design matrix contains NaN or Inf entries")
            A.setflags(write=False)

        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise ValidationError(f"response has {b.shape[0]} entries, expected m={A.shape[0]}")
        if not np.all(np.isfinite(b)):
            raise ValidationError("response contains NaN or Inf entries")
        b.setflags(write=False)

        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.A)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        """Returns ``A x``."""
        return np.asarray(self.A @ x, dtype=np.float64).reshape(-1)

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        """Returns ``A^T y``."""
        return np.asarray(self.A.T @ y, dtype=np.float64).reshape(-1)

    def right_multiply(self, Q: sp.spmatrix) -> np.ndarray:
        """
        Computes the dense product ``A Q`` for a sparse ``n x r`` matrix ``Q``
        without forming any permuted copy of ``A``.

        :param Q: Sparse right factor with ``n`` rows.
        :type Q: sp.spmatrix
        :return: Dense ``m x r`` array.
        :rtype: np.ndarray
        """
        product = Q.T @ self.A.T
        if sp.issparse(product):
            product = product.toarray()
        return np.ascontiguousarray(np.asarray(product).T)

    def gram(self) -> np.ndarray:
        """Dense ``A A^T`` (``m x m``)."""
        product = self.A @ self.A.T
        if sp.issparse(product):
            product = product.toarray()
        return np.asarray(product)

    def residual(self, x: np.ndarray) -> np.ndarray:
        return self.matvec(x) - self.b


@dataclass(frozen=True, eq=False)
class LambdaSeq:
    """
    Non-increasing, nonnegative weights of the sorted-l1 penalty.

    ``lam[0] > 0`` is required unless the sequence was built with
    :meth:`relaxed`, which exists for oracle tests that need the zero penalty.

    :ivar lam: Weight vector of length ``n``.
    :type lam: np.ndarray
    """
    lam: np.ndarray
    strict: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=np.float64).reshape(-1)
        if lam.size == 0:
            raise ValidationError("weight sequence must be non-empty")
        if not np.all(np.isfinite(lam)):
            raise ValidationError("weight sequence contains NaN or Inf entries")
        if np.any(lam < 0):
            raise ValidationError("weights must be nonnegative")
        if np.any(np.diff(lam) > 0):
            first = int(np.argmax(np.diff(lam) > 0))
            raise ValidationError(
                f"weights must be non-increasing: lam[{first}]={lam[first]!r} < lam[{first + 1}]={lam[first + 1]!r}")
        if self.strict and lam[0] <= 0:
            raise ValidationError("the largest weight must be strictly positive")
        lam.setflags(write=False)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def relaxed(cls, lam) -> "LambdaSeq":
        return cls(lam, strict=False)

    def __len__(self) -> int:
        return self.lam.shape[0]

    def scaled(self, sigma: float) -> "LambdaSeq":
        """Weights multiplied by a positive scalar (``sigma * lam``)."""
        if not sigma > 0:
            raise ValidationError(f"scale must be positive, got {sigma!r}")
        return LambdaSeq(sigma * self.lam, strict=self.strict)


def oscar_weights(w1: float, w2: float, n: int) -> LambdaSeq:
    """
    Builds the OSCAR weights ``lam_i = w1 + w2 (n - i)`` for ``i = 1..n``.

    With these weights the sorted-l1 penalty equals
    ``w1 ||x||_1 + w2 sum_{i<j} max(|x_i|, |x_j|)``.

    :param w1: Weight of the l1 term.
    :type w1: float
    :param w2: Weight of the pairwise l-infinity term.
    :type w2: float
    :param n: Number of features.
    :type n: int
    :return: The weight sequence.
    :rtype: LambdaSeq
    :raises ValidationError: If ``n < 1``, a weight is negative, or both are zero.
    """
    if n < 1:
        raise ValidationError(f"n must be at least 1, got {n}")
    if w1 < 0 or w2 < 0:
        raise ValidationError(f"OSCAR weights must be nonnegative, got w1={w1!r}, w2={w2!r}")
    if w1 + w2 <= 0:
        raise ValidationError("w1 and w2 cannot both be zero")
    # 0-based k = i - 1, so n - i = n - 1 - k
    return LambdaSeq(w1 + w2 * np.arange(n - 1, -1, -1, dtype=np.float64))


def penalty_value(x: np.ndarray, lam: LambdaSeq) -> float:
    """
    Evaluates ``sum_i lam_i |x|_i``, the entries of ``|x|`` sorted in
    non-increasing order.

    :raises ValidationError: On length mismatch.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != len(lam):
        raise ValidationError(f"length mismatch: x has {x.shape[0]} entries, lam has {len(lam)}")
    return float(np.dot(np.sort(np.abs(x))[::-1], lam.lam))


def oscar_penalty(x: np.ndarray, w1: float, w2: float) -> float:
    """
    ``w1 ||x||_1 + w2 sum_{i<j} max(|x_i|, |x_j|)``. The pairwise sum is taken
    through the sorted magnitudes: the k-th largest entry is the maximum of
    exactly ``n - k`` pairs.
    """
    a = np.sort(np.abs(np.asarray(x, dtype=np.float64).reshape(-1)))[::-1]
    pair_counts = np.arange(a.shape[0] - 1, -1, -1, dtype=np.float64)
    return float(w1 * a.sum() + w2 * np.dot(pair_counts, a))


def lambda_max(p: ProblemData) -> float:
    """``||A^T b||_inf``, the reference scale of the weight scheme."""
    return float(np.max(np.abs(p.rmatvec(p.b))))


def oscar_weights_from_factor(a: float, p: ProblemData) -> Tuple[float, float]:
    """
    Weight scheme ``w1 = a ||A^T b||_inf`` and ``w2 = w1 / sqrt(n)``.

    :param a: Positive factor.
    :type a: float
    :param p: The instance providing ``A``, ``b`` and ``n``.
    :type p: ProblemData
    :return: The pair ``(w1, w2)``.
    :rtype: Tuple[float, float]
    """
    if not a > 0:
        raise ValidationError(f"weight factor must be positive, got {a!r}")
    w1 = a * lambda_max(p)
    if w1 <= 0:
        raise ValidationError("A^T b is zero; the factor parameterization is degenerate")
    return w1, w1 / np.sqrt(p.n)
