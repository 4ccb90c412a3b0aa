"""Partially paired samples: complete pairs plus unpaired observations of each arm."""

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from ._kernels import row_mean_var
from .errors import NonFiniteValue, RecordBothMissing


def _frozen(values, shape):
    arr = np.array(values, dtype=np.float64).reshape(shape)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PartiallyPairedSample:
    """Matched-pairs data where some subjects lack one of the two measurements.

    Attributes
    ----------
    complete : ndarray, shape (n1, 2)
        Subjects with both components observed, in input order.
    first_only : ndarray, shape (n2,)
        Subjects observed only in the first arm.
    second_only : ndarray, shape (n3,)
        Subjects observed only in the second arm.

    The arrays are read-only; instances are safe to share between threads.
    """

    complete: np.ndarray
    first_only: np.ndarray
    second_only: np.ndarray

    def __init__(self, complete=(), first_only=(), second_only=()):
        complete = _frozen(complete, (-1, 2))
        first_only = _frozen(first_only, (-1,))
        second_only = _frozen(second_only, (-1,))
        for arr in (complete, first_only, second_only):
            if not np.all(np.isfinite(arr)):
                bad = arr[~np.isfinite(arr)].flat[0]
                raise NonFiniteValue(-1, float(bad))
        object.__setattr__(self, "complete", complete)
        object.__setattr__(self, "first_only", first_only)
        object.__setattr__(self, "second_only", second_only)

    @property
    def n1(self) -> int:
        return self.complete.shape[0]

    @property
    def n2(self) -> int:
        return self.first_only.shape[0]

    @property
    def n3(self) -> int:
        return self.second_only.shape[0]

    @property
    def n(self) -> int:
        return self.n1 + self.n2 + self.n3

    @property
    def differences(self) -> np.ndarray:
        """``x1 - x2`` for every complete pair."""
        return self.complete[:, 0] - self.complete[:, 1]

    @property
    def pooled_incomplete(self) -> np.ndarray:
        """First-only values followed by second-only values."""
        return np.concatenate([self.first_only, self.second_only])

    def swapped(self) -> "PartiallyPairedSample":
        """The sample with the roles of the two arms exchanged."""
        return PartiallyPairedSample(
            self.complete[:, ::-1], self.second_only, self.first_only
        )

    def map_values(self, func) -> "PartiallyPairedSample":
        """Apply an elementwise transform to every observed value."""
        return PartiallyPairedSample(
            func(self.complete), func(self.first_only), func(self.second_only)
        )

    def shift_first(self, amount: float) -> "PartiallyPairedSample":
        """Add ``amount`` to every first-component observation."""
        complete = self.complete.copy()
        complete[:, 0] += amount
        return PartiallyPairedSample(complete, self.first_only + amount, self.second_only)

    def __eq__(self, other):
        if not isinstance(other, PartiallyPairedSample):
            return NotImplemented
        return (
            np.array_equal(self.complete, other.complete)
            and np.array_equal(self.first_only, other.first_only)
            and np.array_equal(self.second_only, other.second_only)
        )

    def __repr__(self):
        return (
            f"PartiallyPairedSample(n1={self.n1}, n2={self.n2}, n3={self.n3})"
        )


Record = Tuple[Optional[float], Optional[float]]


def from_records(records: Iterable[Record]) -> PartiallyPairedSample:
    """Partition ``(x1, x2)`` records into a :class:`PartiallyPairedSample`.

    ``None`` marks a missing component. Order is preserved within each of the
    three containers.

    Raises
    ------
    RecordBothMissing
        If a record has no observed component.
    NonFiniteValue
        If an observed component is NaN or infinite.
    """
    complete, first, second = [], [], []
    for index, (x1, x2) in enumerate(records):
        for value in (x1, x2):
            if value is not None and not math.isfinite(value):
                raise NonFiniteValue(index, value)
        if x1 is None and x2 is None:
            raise RecordBothMissing(index)
        if x2 is None:
            first.append(float(x1))
        elif x1 is None:
            second.append(float(x2))
        else:
            complete.append((float(x1), float(x2)))
    return PartiallyPairedSample(complete, first, second)


@dataclass(frozen=True)
class SampleSummary:
    """Descriptive statistics of a partially paired sample.

    Entries that need more data than is available are ``None``. Variances use
    the ``n - 1`` divisor. ``mean1_ci``/``mean2_ci`` pool the complete and
    unpaired observations of each arm.
    """

    n1: int
    n2: int
    n3: int
    mean_d: Optional[float]
    var_d: Optional[float]
    mean1_i: Optional[float]
    mean2_i: Optional[float]
    var1_i: Optional[float]
    var2_i: Optional[float]
    r: Optional[float]
    mean1_ci: Optional[float]
    mean2_ci: Optional[float]


def _mean_var(values: Sequence[float]):
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        return None, None
    mean, var = row_mean_var(values[None, :])
    var = float(var[0])
    return float(mean[0]), (None if math.isnan(var) else var)


def complete_correlation(complete: np.ndarray) -> Optional[float]:
    """Pearson correlation of the complete pairs, or ``None`` if undefined."""
    if complete.shape[0] < 2:
        return None
    # canonical order makes the value independent of input order
    order = np.lexsort((complete[:, 1], complete[:, 0]))
    x = complete[order, 0]
    y = complete[order, 1]
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx <= 0.0 or syy <= 0.0:
        return None
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def summarize(sample: PartiallyPairedSample) -> SampleSummary:
    """Compute a :class:`SampleSummary`; never raises for small samples."""
    mean_d, var_d = _mean_var(sample.differences)
    mean1_i, var1_i = _mean_var(sample.first_only)
    mean2_i, var2_i = _mean_var(sample.second_only)
    mean1_ci, _ = _mean_var(np.concatenate([sample.complete[:, 0], sample.first_only]))
    mean2_ci, _ = _mean_var(np.concatenate([sample.complete[:, 1], sample.second_only]))
    return SampleSummary(
        n1=sample.n1,
        n2=sample.n2,
        n3=sample.n3,
        mean_d=mean_d,
        var_d=var_d,
        mean1_i=mean1_i,
        mean2_i=mean2_i,
        var1_i=var1_i,
        var2_i=var2_i,
        r=complete_correlation(sample.complete),
        mean1_ci=mean1_ci,
        mean2_ci=mean2_ci,
    )
