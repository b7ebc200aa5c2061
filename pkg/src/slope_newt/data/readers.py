from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from ..models.errors import DataFormatError, ValidationError
from ..models.problem import LambdaSeq, ProblemData
from ..utils.logging import logger

PathLike = Union[str, Path]


def _parse_libsvm_line(line: str, lineno: int, indices: list, values: list) -> float:
    tokens = line.split()
    try:
        label = float(tokens[0])
    except ValueError:
        raise DataFormatError(f"invalid label {tokens[0]!r}", lineno) from None
    if not np.isfinite(label):
        raise DataFormatError("NaN or Inf label", lineno)

    seen = set()
    for token in tokens[1:]:
        index, sep, value = token.partition(":")
        if not sep:
            raise DataFormatError(f"expected idx:val, got {token!r}", lineno)
        try:
            j = int(index)
            v = float(value)
        except ValueError:
            raise DataFormatError(f"malformed feature {token!r}", lineno) from None
        if j <= 0:
            raise DataFormatError(f"feature indices are 1-based, got {j}", lineno)
        if j in seen:
            raise DataFormatError(f"duplicate feature index {j}", lineno)
        if not np.isfinite(v):
            raise DataFormatError("NaN or Inf value", lineno)
        seen.add(j)
        indices.append(j - 1)
        values.append(v)
    return label


def read_libsvm(path: PathLike, num_features: Optional[int] = None) -> ProblemData:
    """
    Reads a LIBSVM/SVMlight file (``label idx:val idx:val ...`` with 1-based
    indices) into a CSR-backed :class:`ProblemData`; the labels become ``b``.

    Blank lines and lines starting with ``#`` are skipped. A record without
    features is an all-zero row.

    :param path: File to read.
    :type path: Union[str, Path]
    :param num_features: Number of columns; defaults to the largest index seen.
    :type num_features: Optional[int]
    :return: The instance.
    :rtype: ProblemData
    :raises DataFormatError: On a malformed record, with its line number.
    :raises OSError: If the file cannot be read.
    """
    indptr, indices, values, labels = [0], [], [], []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            labels.append(_parse_libsvm_line(line, lineno, indices, values))
            indptr.append(len(indices))

    if not labels:
        raise DataFormatError(f"{path}: no records")
    n = max(indices) + 1 if indices else 0
    if num_features is not None:
        if num_features < n:
            raise DataFormatError(f"{path}: feature index {n} exceeds num_features={num_features}")
        n = num_features
    if n < 1:
        raise DataFormatError(f"{path}: no features")

    A = sp.csr_matrix((np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64),
                       np.asarray(indptr, dtype=np.int64)), shape=(len(labels), n))
    logger.info("Read %d records with %d features (%d nonzeros) from %s", A.shape[0], n, A.nnz, path)
    return ProblemData(A, np.asarray(labels))


def read_dense_csv(path: PathLike) -> ProblemData:
    """
    Reads header-less comma-separated dense rows; the last column is ``b``.

    :raises DataFormatError: If the file is not a numeric table with at least two columns.
    :raises OSError: If the file cannot be read.
    """
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        table = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as e:
        raise DataFormatError(f"{path}: {e}") from None
    if table.shape[0] < 1 or table.shape[1] < 2:
        raise DataFormatError(f"{path}: expected at least one row with two or more columns")
    logger.info("Read a %d x %d dense design from %s", table.shape[0], table.shape[1] - 1, path)
    try:
        return ProblemData(table[:, :-1], table[:, -1])
    except ValidationError as e:
        raise DataFormatError(f"{path}: {e}") from None


def read_lambda_file(path: PathLike) -> LambdaSeq:
    """Reads a weight sequence written one value per line (or comma separated)."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"no such file: {path}")
    text = Path(path).read_text().replace(",", " ")
    try:
        lam = np.array([float(token) for token in text.split()], dtype=np.float64)
    except ValueError as e:
        raise DataFormatError(f"{path}: {e}") from None
    return LambdaSeq(lam)
