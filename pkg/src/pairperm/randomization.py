"""Studentized randomization test for partially paired data.

The randomization group acts in two independent parts:

* each complete pair may have its two components swapped;
* the unpaired observations of both arms are pooled and rearranged, the
  first ``n2`` slots becoming the new first arm.

Under the null the weighted statistic is re-evaluated on transformed data and
the observed value is compared against that conditional distribution.
Monte Carlo replicates draw group elements from counter-based streams keyed
by ``(seed, replicate)``, so results do not depend on chunking or on the
number of worker threads.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

import numpy as np

from . import _kernels, streams
from .errors import (
    DegenerateReplicate,
    DimensionMismatch,
    GroupTooLarge,
    PairPermError,
)
from .sample import PartiallyPairedSample
from .statistics import (
    Side,
    WeightRule,
    check_side,
    resolve_weight,
    sw_scale,
    weighted_statistic,
)

DEFAULT_GROUP_LIMIT = 10**7
_CHUNK = 2048

# ---------------------------------------------------------------------------
# group elements


@dataclass(frozen=True, eq=False)
class RandomizationDraw:
    """One element of the randomization group.

    ``flips[j]`` swaps the components of complete pair ``j``.
    ``arrangement`` is a 0-based permutation of the pooled unpaired slots:
    the new pooled vector is ``pooled[arrangement]``.
    """

    flips: np.ndarray
    arrangement: np.ndarray

    def __init__(self, flips, arrangement):
        flips = np.asarray(flips, dtype=bool).reshape(-1)
        arrangement = np.asarray(arrangement, dtype=np.intp).reshape(-1)
        m = arrangement.shape[0]
        if not np.array_equal(np.sort(arrangement), np.arange(m)):
            raise DimensionMismatch(f"arrangement {arrangement.tolist()} is not a permutation of 0..{m - 1}")
        flips.setflags(write=False)
        arrangement.setflags(write=False)
        object.__setattr__(self, "flips", flips)
        object.__setattr__(self, "arrangement", arrangement)

    @classmethod
    def identity(cls, n_pairs: int, n_pooled: int) -> "RandomizationDraw":
        return cls(np.zeros(n_pairs, dtype=bool), np.arange(n_pooled))

    def then(self, other: "RandomizationDraw") -> "RandomizationDraw":
        """The element that applies ``self`` first and ``other`` second."""
        if self.flips.shape != other.flips.shape or self.arrangement.shape != other.arrangement.shape:
            raise DimensionMismatch("cannot compose draws of different dimensions")
        return RandomizationDraw(self.flips ^ other.flips, self.arrangement[other.arrangement])

    def __eq__(self, other):
        if not isinstance(other, RandomizationDraw):
            return NotImplemented
        return np.array_equal(self.flips, other.flips) and np.array_equal(
            self.arrangement, other.arrangement
        )


def group_size(n1: int, n2: int, n3: int) -> int:
    """Number of group elements, ``2**n1 * (n2 + n3)!``."""
    return 2**n1 * math.factorial(n2 + n3)


def iter_group(n1: int, n_pooled: int):
    """Yield every group element once (flips outer, arrangements inner)."""
    for flips in itertools.product((False, True), repeat=n1):
        for arrangement in itertools.permutations(range(n_pooled)):
            yield RandomizationDraw(flips, arrangement)


def _check_dims(sample, n_flips, n_pooled):
    if n_flips != sample.n1 or n_pooled != sample.n2 + sample.n3:
        raise DimensionMismatch(
            f"draw acts on {n_flips} pairs and {n_pooled} pooled values, sample has "
            f"{sample.n1} pairs and {sample.n2 + sample.n3} pooled values"
        )


def apply_draw(sample: PartiallyPairedSample, draw: RandomizationDraw) -> PartiallyPairedSample:
    """Transform ``sample`` by a group element."""
    _check_dims(sample, draw.flips.shape[0], draw.arrangement.shape[0])
    complete = np.where(draw.flips[:, None], sample.complete[:, ::-1], sample.complete)
    pooled = sample.pooled_incomplete[draw.arrangement]
    return PartiallyPairedSample(complete, pooled[: sample.n2], pooled[sample.n2 :])


# ---------------------------------------------------------------------------
# vectorized replicate statistics


def _t1_values(sample, flips, floor):
    signed = np.where(flips, -sample.differences, sample.differences)
    t1, se2 = _kernels.studentized_mean(signed, floor)
    if not floor and not np.all(se2 > 0.0):
        raise DegenerateReplicate("a replicate has zero variance of paired differences")
    return t1


def _t2_values(sample, arm1, arm2, floor):
    t2, se2 = _kernels.welch(arm1, arm2, floor)
    if not floor and not np.all(se2 > 0.0):
        raise DegenerateReplicate("a replicate has zero variance in both unpaired arms")
    return t2


def _combine(a, t1, t2):
    total = 0.0
    if a > 0.0:
        total = total + math.sqrt(a) * t1
    if a < 1.0:
        total = total + math.sqrt(1.0 - a) * t2
    return total


def replicate_statistics(sample, a, flips, arrangements, policy="floor"):
    """Weighted statistic for a batch of group elements.

    Parameters
    ----------
    flips : ndarray of bool, shape (B, n1)
    arrangements : ndarray of int, shape (B, n2 + n3)
    policy : {"floor", "strict"}
        ``floor`` replaces zero variances by a tiny positive floor;
        ``strict`` raises :class:`DegenerateReplicate`.
    """
    if policy not in ("floor", "strict"):
        raise PairPermError(f"unknown degeneracy policy {policy!r}")
    floor = policy == "floor"
    rows = flips.shape[0]
    _check_dims(sample, flips.shape[1], arrangements.shape[1])
    t1 = _t1_values(sample, flips, floor) if a > 0.0 else np.zeros(rows)
    if a < 1.0:
        pooled = sample.pooled_incomplete[arrangements]
        t2 = _t2_values(sample, pooled[:, : sample.n2], pooled[:, sample.n2 :], floor)
    else:
        t2 = np.zeros(rows)
    return np.broadcast_to(_combine(a, t1, t2), (rows,)).astype(np.float64)


def permutation_statistic(
    sample: PartiallyPairedSample,
    draw: RandomizationDraw,
    rule: Union[WeightRule, float] = WeightRule.PAPER,
    policy: str = "floor",
) -> float:
    """Weighted statistic of the transformed sample ``draw(sample)``.

    The weight is computed from the sample sizes, which the group preserves.
    """
    a = resolve_weight(sample, rule)
    values = replicate_statistics(
        sample, a, draw.flips[None, :], draw.arrangement[None, :], policy
    )
    return float(values[0])


def mc_replicates(sample, a, B, seed, policy="floor", workers=1):
    """Statistics of replicates ``0 .. B - 1`` drawn from ``seed``."""
    m = sample.n2 + sample.n3
    bounds = [(lo, min(lo + _CHUNK, B)) for lo in range(0, B, _CHUNK)]

    def run(bound):
        flips, arrangements = streams.draw_group_elements(sample.n1, m, seed, *bound)
        return replicate_statistics(sample, a, flips, arrangements, policy)

    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, bounds))
    else:
        parts = [run(b) for b in bounds]
    return np.concatenate(parts) if parts else np.empty(0)


# ---------------------------------------------------------------------------
# critical values and p-values


def critical_value(values, alpha, weights=None) -> Tuple[float, float]:
    """Upper ``alpha`` critical value ``c`` and tie weight ``gamma``.

    ``c`` is the smallest value with ``#{T > c} <= alpha * N`` and
    ``gamma = (alpha * N - #{T > c}) / #{T = c}``, so that rejecting above
    ``c`` and with probability ``gamma`` at ``c`` has mass exactly ``alpha``.
    Values are compared exactly, without tolerance.
    """
    values = np.asarray(values, dtype=np.float64)
    if weights is None:
        weights = np.ones(values.shape, dtype=np.int64)
    uniq, inverse = np.unique(values, return_inverse=True)
    counts = np.bincount(inverse.reshape(-1), weights=None if weights is None else weights, minlength=uniq.size)
    counts = np.rint(counts).astype(np.int64)
    total = int(counts.sum())
    above = total - np.cumsum(counts)  # #{T > uniq[i]}
    target = alpha * total
    idx = int(np.argmax(above <= target))
    c = float(uniq[idx])
    gamma = (target - above[idx]) / counts[idx]
    return c, float(gamma)


def _tail_counts(values, weights, t_obs):
    if weights is None:
        return (
            int(np.count_nonzero(values >= t_obs)),
            int(np.count_nonzero(values <= t_obs)),
            int(np.count_nonzero(np.abs(values) >= abs(t_obs))),
            values.shape[0],
        )
    return (
        int(weights[values >= t_obs].sum()),
        int(weights[values <= t_obs].sum()),
        int(weights[np.abs(values) >= abs(t_obs)].sum()),
        int(weights.sum()),
    )


@dataclass(frozen=True)
class PermutationTestResult:
    """Outcome of a randomization test.

    ``p_one_sided`` is the upper-tail p-value (alternative ``mu1 > mu2``),
    ``p_lower`` the lower-tail one. ``p_two_sided`` is ``min(2p, 2 - 2p)`` of
    the upper-tail p-value unless ``two_sided="abs"`` was requested, in which
    case it compares ``|T|``. ``c_p_alpha`` and ``gamma_p`` define the
    randomized one-sided level-``alpha`` test.
    """

    t_obs: float
    p_one_sided: float
    p_lower: float
    p_two_sided: float
    replicates: int
    c_p_alpha: float
    gamma_p: float
    seed: Optional[int]
    exact: bool
    alpha: float
    side: str
    weight: float
    values: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    weights: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def p_value(self) -> float:
        """p-value matching ``side``."""
        return {
            "greater": self.p_one_sided,
            "less": self.p_lower,
            "two-sided": self.p_two_sided,
        }[self.side]

    @property
    def reject(self) -> bool:
        return self.p_value <= self.alpha

    def randomized_decision(self, t: Optional[float] = None) -> float:
        """Value in ``[0, 1]`` of the randomized one-sided test at ``t``."""
        t = self.t_obs if t is None else t
        if t > self.c_p_alpha:
            return 1.0
        if t == self.c_p_alpha:
            return self.gamma_p
        return 0.0


def _result(t_obs, values, weights, alpha, side, seed, exact, a, two_sided, plus_one, keep):
    ge, le, abs_ge, total = _tail_counts(values, weights, t_obs)
    if plus_one:
        p1, p_low, p_abs = ((k + 1) / (total + 1) for k in (ge, le, abs_ge))
    else:
        p1, p_low, p_abs = ge / total, le / total, abs_ge / total
    if two_sided == "paper":
        p2 = min(2.0 * p1, 2.0 - 2.0 * p1)
    elif two_sided == "abs":
        p2 = p_abs
    else:
        raise PairPermError(f"two_sided must be 'paper' or 'abs', got {two_sided!r}")
    c, gamma = critical_value(values, alpha, weights)
    return PermutationTestResult(
        t_obs=t_obs,
        p_one_sided=p1,
        p_lower=p_low,
        p_two_sided=p2,
        replicates=total,
        c_p_alpha=c,
        gamma_p=gamma,
        seed=seed,
        exact=exact,
        alpha=alpha,
        side=side,
        weight=a,
        values=values if keep else None,
        weights=weights if keep else None,
    )


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise PairPermError(f"alpha must lie in (0, 1), got {alpha!r}")


def mc_permutation_test(
    sample: PartiallyPairedSample,
    rule: Union[WeightRule, float] = WeightRule.PAPER,
    B: int = 1000,
    seed: int = 0,
    side: Side = "two-sided",
    alpha: float = 0.05,
    *,
    policy: str = "floor",
    two_sided: str = "paper",
    plus_one: bool = False,
    workers: int = 1,
    keep_replicates: bool = False,
) -> PermutationTestResult:
    """Monte Carlo randomization test with ``B`` random group elements.

    The upper-tail p-value is ``#{T_b >= T} / B`` (or ``(1 + #) / (1 + B)``
    with ``plus_one``). Identical arguments give bit-identical results for
    any ``workers``.
    """
    check_side(side)
    _check_alpha(alpha)
    if B < 1:
        raise PairPermError(f"B must be at least 1, got {B}")
    a = resolve_weight(sample, rule)
    t_obs = weighted_statistic(sample, a)
    values = mc_replicates(sample, a, B, seed, policy, workers)
    return _result(t_obs, values, None, alpha, side, int(seed), False, a, two_sided, plus_one, keep_replicates)


def _subset_arrangements(n2: int, n3: int) -> np.ndarray:
    """One arrangement per split of the pooled slots into the two arms."""
    m = n2 + n3
    rows = []
    for chosen in itertools.combinations(range(m), n2):
        rest = [k for k in range(m) if k not in chosen]
        rows.append(list(chosen) + rest)
    return np.array(rows, dtype=np.intp).reshape(-1, m)


def exact_distribution(sample, a, policy="floor", limit=DEFAULT_GROUP_LIMIT):
    """Distinct statistic values over the full group with their multiplicities.

    Arrangements that send the same set of pooled values to the first arm
    yield bit-identical statistics, so each split is evaluated once and
    weighted by ``n2! * n3!``. Likewise every flip pattern is evaluated once.
    """
    n1, n2, n3 = sample.n1, sample.n2, sample.n3
    size = group_size(n1, n2, n3)
    if size > limit:
        raise GroupTooLarge(size, limit)
    flips = np.array(list(itertools.product((False, True), repeat=n1)), dtype=bool).reshape(-1, n1)
    splits = _subset_arrangements(n2, n3)
    floor = policy == "floor"
    if policy not in ("floor", "strict"):
        raise PairPermError(f"unknown degeneracy policy {policy!r}")
    t1 = _t1_values(sample, flips, floor) if a > 0.0 else np.zeros(flips.shape[0])
    if a < 1.0:
        pooled = sample.pooled_incomplete[splits]
        t2 = _t2_values(sample, pooled[:, :n2], pooled[:, n2:], floor)
    else:
        t2 = np.zeros(splits.shape[0])
    values = _combine(a, t1[:, None], t2[None, :])
    values = np.broadcast_to(values, (flips.shape[0], splits.shape[0])).reshape(-1)
    multiplicity = math.factorial(n2) * math.factorial(n3)
    weights = np.full(values.shape, multiplicity, dtype=np.int64)
    return np.ascontiguousarray(values, dtype=np.float64), weights


def exact_permutation_test(
    sample: PartiallyPairedSample,
    rule: Union[WeightRule, float] = WeightRule.PAPER,
    alpha: float = 0.05,
    side: Side = "two-sided",
    *,
    policy: str = "floor",
    two_sided: str = "paper",
    limit: int = DEFAULT_GROUP_LIMIT,
    keep_replicates: bool = False,
) -> PermutationTestResult:
    """Randomization test over the complete group of ``2**n1 * (n2+n3)!`` elements.

    Raises
    ------
    GroupTooLarge
        If the group exceeds ``limit`` elements.
    """
    check_side(side)
    _check_alpha(alpha)
    a = resolve_weight(sample, rule)
    t_obs = weighted_statistic(sample, a)
    values, weights = exact_distribution(sample, a, policy, limit)
    return _result(t_obs, values, weights, alpha, side, None, True, a, two_sided, False, keep_replicates)


# ---------------------------------------------------------------------------
# interval and equivalence


@dataclass(frozen=True)
class ConfidenceInterval:
    """Two-sided interval for ``mu1 - mu2``; iterates as ``(lo, hi)``."""

    lo: float
    hi: float
    t_obs: float
    critical_value: float
    scale: float
    alpha: float
    replicates: int
    seed: int
    values: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __iter__(self):
        return iter((self.lo, self.hi))


def confidence_interval(
    sample: PartiallyPairedSample,
    rule: Union[WeightRule, float] = WeightRule.PAPER,
    alpha: float = 0.05,
    B: int = 1000,
    seed: int = 0,
    *,
    policy: str = "floor",
    workers: int = 1,
) -> ConfidenceInterval:
    """Interval ``(T -/+ c) / S_w`` from the permutation quantile ``c``.

    ``c`` is the upper ``alpha / 2`` critical value of the Monte Carlo
    permutation distribution and ``S_w`` is :func:`sw_scale`.
    """
    _check_alpha(alpha)
    if B < 1:
        raise PairPermError(f"B must be at least 1, got {B}")
    a = resolve_weight(sample, rule)
    t_obs = weighted_statistic(sample, a)
    scale = sw_scale(sample, a)
    values = mc_replicates(sample, a, B, seed, policy, workers)
    c, _ = critical_value(values, alpha / 2.0)
    lo, hi = sorted(((t_obs - c) / scale, (t_obs + c) / scale))
    return ConfidenceInterval(lo, hi, t_obs, c, scale, alpha, B, int(seed), values)


@dataclass(frozen=True)
class TostResult:
    """Two one-sided randomization tests for ``|mu1 - mu2| >= epsilon``.

    ``p_upper_bound`` tests ``mu1 - mu2 >= epsilon`` (data shifted by
    ``-epsilon``, lower tail); ``p_lower_bound`` tests
    ``mu1 - mu2 <= -epsilon`` (shifted by ``+epsilon``, upper tail).
    """

    equivalent: bool
    p_upper_bound: float
    p_lower_bound: float
    epsilon: float
    alpha: float
    replicates: int
    seed: int

    @property
    def p_value(self) -> float:
        return max(self.p_upper_bound, self.p_lower_bound)


def tost_equivalence_test(
    sample: PartiallyPairedSample,
    rule: Union[WeightRule, float] = WeightRule.PAPER,
    epsilon: float = 1.0,
    alpha: float = 0.05,
    B: int = 1000,
    seed: int = 0,
    *,
    policy: str = "floor",
    workers: int = 1,
) -> TostResult:
    """Intersection-union equivalence test with margin ``epsilon``.

    The shift is applied to first-component observations only. Both
    one-sided tests use the same ``seed``.
    """
    if not (epsilon > 0.0 and math.isfinite(epsilon)):
        raise PairPermError(f"epsilon must be positive and finite, got {epsilon!r}")
    _check_alpha(alpha)
    upper = mc_permutation_test(
        sample.shift_first(-epsilon), rule, B, seed, "less", alpha, policy=policy, workers=workers
    )
    lower = mc_permutation_test(
        sample.shift_first(epsilon), rule, B, seed, "greater", alpha, policy=policy, workers=workers
    )
    p_up, p_low = upper.p_lower, lower.p_one_sided
    return TostResult(
        equivalent=max(p_up, p_low) <= alpha,
        p_upper_bound=p_up,
        p_lower_bound=p_low,
        epsilon=float(epsilon),
        alpha=alpha,
        replicates=B,
        seed=int(seed),
    )


# ---------------------------------------------------------------------------
# replicate dumps


def write_replicates(path, values) -> None:
    """Write one statistic per line with round-trip precision."""
    with open(path, "w") as fh:
        for v in np.asarray(values, dtype=np.float64):
            fh.write(f"{float(v)!r}\n")


def read_replicates(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([float(line) for line in fh if line.strip()], dtype=np.float64)
