from typing import Optional, Tuple

import numpy as np

from ..models.errors import ValidationError
from ..models.problem import ProblemData


def synth_instance(m: int, n: int, n_groups: int, noise_sd: float = 0.0, seed: int = 0,
                   group_size: Optional[int] = None) -> Tuple[ProblemData, np.ndarray]:
    """
    Generates a dense regression instance with grouped coefficients.

    ``A`` has independent standard-normal entries scaled by ``1/sqrt(m)``. The
    true coefficient vector holds ``n_groups`` groups of ``group_size``
    identical entries; group ``j`` (0-based) has magnitude ``j + 1`` and a
    random sign, and the groups sit at random positions. The response is
    ``b = A x_true + noise_sd * e`` with standard-normal ``e``.

    :param m: Number of observations.
    :type m: int
    :param n: Number of features.
    :type n: int
    :param n_groups: Number of nonzero groups, ``1 <= n_groups <= n``.
    :type n_groups: int
    :param noise_sd: Standard deviation of the additive noise.
    :type noise_sd: float
    :param seed: Seed of the ``numpy`` generator; equal seeds give
        bit-identical instances.
    :type seed: int
    :param group_size: Entries per group. Defaults to
        ``max(1, min(10, n // (2 n_groups)))``.
    :type group_size: Optional[int]
    :return: The instance and ``x_true``.
    :rtype: Tuple[ProblemData, np.ndarray]
    :raises ValidationError: On out-of-range parameters.
    """
    if m < 1 or n < 1:
        raise ValidationError(f"m and n must be positive, got m={m}, n={n}")
    if not 1 <= n_groups <= n:
        raise ValidationError(f"n_groups must lie in [1, n={n}], got {n_groups}")
    if noise_sd < 0 or not np.isfinite(noise_sd):
        raise ValidationError(f"noise_sd must be a finite nonnegative number, got {noise_sd!r}")
    if group_size is None:
        group_size = max(1, min(10, n // (2 * n_groups)))
    if group_size < 1 or group_size * n_groups > n:
        raise ValidationError(f"{n_groups} groups of size {group_size} do not fit into n={n}")

    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, n)) / np.sqrt(m)

    x_true = np.zeros(n)
    support = rng.permutation(n)[:n_groups * group_size]
    signs = rng.choice((-1.0, 1.0), size=n_groups)
    for j in range(n_groups):
        x_true[support[j * group_size:(j + 1) * group_size]] = signs[j] * (j + 1.0)

    b = A @ x_true
    if noise_sd > 0:
        b = b + noise_sd * rng.standard_normal(m)
    return ProblemData(A, b), x_true
