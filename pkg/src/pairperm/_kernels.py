"""Row-wise moment kernels shared by the observed and resampled statistics.

Rows are sorted before reduction, so every moment is a function of the
multiset of row values, bit for bit. Permuted statistics of the same data
that are mathematically tied are then tied in floating point too, which the
exact test and its tie weight rely on.
"""

import numpy as np

# Variance floor used by the ``floor`` degeneracy policy.
VARIANCE_FLOOR = 1e-300


def row_mean_var(x):
    """Mean and unbiased variance of each row of a 2-D array.

    Returns
    -------
    mean, var : ndarray
        ``var`` is NaN for rows with fewer than two values.
    """
    x = np.sort(np.asarray(x, dtype=np.float64), axis=-1)
    n = x.shape[-1]
    if n == 0:
        nan = np.full(x.shape[:-1], np.nan)
        return nan, nan.copy()
    mean = x.sum(axis=-1) / n
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    dev = x - mean[..., None]
    var = (dev * dev).sum(axis=-1) / (n - 1)
    return mean, var


def studentized_mean(d, floor):
    """Paired t statistic ``mean(d) / sqrt(var(d) / n)`` for each row of ``d``.

    With ``floor`` set, zero variances are replaced by :data:`VARIANCE_FLOOR`;
    otherwise they come back as NaN/inf for the caller to police.
    """
    n = d.shape[-1]
    mean, var = row_mean_var(d)
    se2 = var / n
    if floor:
        se2 = np.maximum(se2, VARIANCE_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        return mean / np.sqrt(se2), se2


def welch(arm1, arm2, floor):
    """Welch statistic for each row pair of ``arm1`` and ``arm2``."""
    n2 = arm1.shape[-1]
    n3 = arm2.shape[-1]
    m1, v1 = row_mean_var(arm1)
    m2, v2 = row_mean_var(arm2)
    se2 = v1 / n2 + v2 / n3
    if floor:
        se2 = np.maximum(se2, VARIANCE_FLOOR)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (m1 - m2) / np.sqrt(se2), se2
