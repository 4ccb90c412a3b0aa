"""Closed-form statistics for partially paired data and their reference tests.

The weighted statistic combines a paired t statistic on the complete pairs
with a Welch statistic on the unpaired observations::

    T = sqrt(a) * T1 + sqrt(1 - a) * T2

Two literature competitors are provided for comparison: the Lin-Stivers
studentized mean difference (t reference with ``n - 4`` df) and Kim's ``t3``
(standard normal reference).
"""

import math
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
from scipy import special

from . import _kernels
from .errors import (
    DegenerateDenominator,
    DegenerateVariance,
    PairPermError,
    TooFewCompletePairs,
    TooFewIncomplete,
    TooFewObservations,
)
from .sample import PartiallyPairedSample, complete_correlation

Side = Literal["greater", "less", "two-sided"]
SIDES = ("greater", "less", "two-sided")


def check_side(side: str) -> str:
    if side not in SIDES:
        raise PairPermError(f"side must be one of {SIDES}, got {side!r}")
    return side


# ---------------------------------------------------------------------------
# weights


@dataclass(frozen=True)
class WeightRule:
    """How much weight ``a`` the complete-pair statistic receives.

    ``kind`` is ``"paper"`` for ``a = 2 n1 / (n + n1)``, ``"prop"`` for
    ``a = n1 / n``, or ``"fixed"`` with ``value`` in ``[0, 1]``.
    """

    kind: str = "paper"
    value: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("paper", "prop", "fixed"):
            raise PairPermError(f"unknown weight rule {self.kind!r}")
        if self.kind == "fixed":
            if self.value is None or not 0.0 <= self.value <= 1.0:
                raise PairPermError(f"fixed weight must lie in [0, 1], got {self.value!r}")
        elif self.value is not None:
            raise PairPermError(f"weight rule {self.kind!r} takes no value")

    @classmethod
    def fixed(cls, a: float) -> "WeightRule":
        return cls("fixed", float(a))

    @classmethod
    def parse(cls, text: str) -> "WeightRule":
        """Parse ``paper``, ``prop`` or ``fixed=<a>``."""
        text = text.strip()
        if text.startswith("fixed="):
            try:
                return cls.fixed(float(text[len("fixed="):]))
            except ValueError:
                raise PairPermError(f"bad fixed weight {text!r}") from None
        return cls(text)

    def __str__(self):
        return f"fixed={self.value!r}" if self.kind == "fixed" else self.kind


WeightRule.PAPER = WeightRule("paper")
WeightRule.PROPORTIONAL = WeightRule("prop")


def complete_weight(n1: int, n2: int, n3: int, rule: WeightRule = WeightRule.PAPER) -> float:
    """Weight ``a`` given to the complete pairs under ``rule``."""
    n = n1 + n2 + n3
    if n <= 0:
        raise TooFewObservations("weight needs at least one observation")
    if rule.kind == "paper":
        return 2.0 * n1 / (n + n1)
    if rule.kind == "prop":
        return n1 / n
    return rule.value


def resolve_weight(sample: PartiallyPairedSample, rule: Union[WeightRule, float]) -> float:
    if isinstance(rule, WeightRule):
        return complete_weight(sample.n1, sample.n2, sample.n3, rule)
    a = float(rule)
    if not 0.0 <= a <= 1.0:
        raise PairPermError(f"weight must lie in [0, 1], got {a!r}")
    return a


# ---------------------------------------------------------------------------
# component statistics


def _check_paired(sample):
    if sample.n1 < 2:
        raise TooFewCompletePairs(f"paired statistic needs n1 >= 2 complete pairs, got {sample.n1}")


def _check_unpaired(sample):
    if sample.n2 < 2 or sample.n3 < 2:
        raise TooFewIncomplete(
            f"Welch statistic needs n2 >= 2 and n3 >= 2 unpaired values, "
            f"got n2={sample.n2}, n3={sample.n3}"
        )


def paired_t_statistic(sample: PartiallyPairedSample) -> float:
    """Paired t statistic of the complete pairs, ``mean(D) / sqrt(var(D) / n1)``."""
    _check_paired(sample)
    t, se2 = _kernels.studentized_mean(sample.differences[None, :], floor=False)
    if not se2[0] > 0.0:
        raise DegenerateVariance("differences of the complete pairs have zero variance")
    return float(t[0])


def welch_statistic(sample: PartiallyPairedSample) -> float:
    """Welch statistic comparing the first-only and second-only observations."""
    _check_unpaired(sample)
    t, se2 = _kernels.welch(sample.first_only[None, :], sample.second_only[None, :], floor=False)
    if not se2[0] > 0.0:
        raise DegenerateVariance("both unpaired arms have zero variance")
    return float(t[0])


def weighted_statistic(
    sample: PartiallyPairedSample, rule: Union[WeightRule, float] = WeightRule.PAPER
) -> float:
    """``sqrt(a) * T1 + sqrt(1 - a) * T2``.

    A component with zero weight is not evaluated, so a fully paired sample
    only needs ``T1`` to be defined and vice versa.
    """
    a = resolve_weight(sample, rule)
    total = 0.0
    if a > 0.0:
        total += math.sqrt(a) * paired_t_statistic(sample)
    if a < 1.0:
        total += math.sqrt(1.0 - a) * welch_statistic(sample)
    return total


def sw_scale(sample: PartiallyPairedSample, a: float) -> float:
    """Scale that maps the weighted statistic back to the mean-difference scale.

    ``sqrt(a) / (sd_d / sqrt(n1)) + sqrt(1 - a) / (sd_1 / sqrt(n2) + sd_2 / sqrt(n3))``

    The second term sums the two standard errors rather than combining them
    in quadrature as the Welch denominator does; this is deliberate.
    """
    if not 0.0 <= a <= 1.0:
        raise PairPermError(f"weight must lie in [0, 1], got {a!r}")
    scale = 0.0
    if a > 0.0:
        _check_paired(sample)
        _, var_d = _kernels.row_mean_var(sample.differences[None, :])
        if not var_d[0] > 0.0:
            raise DegenerateVariance("differences of the complete pairs have zero variance")
        scale += math.sqrt(a) / (math.sqrt(var_d[0]) / math.sqrt(sample.n1))
    if a < 1.0:
        _check_unpaired(sample)
        _, v1 = _kernels.row_mean_var(sample.first_only[None, :])
        _, v2 = _kernels.row_mean_var(sample.second_only[None, :])
        if not (v1[0] > 0.0 and v2[0] > 0.0):
            raise DegenerateVariance("an unpaired arm has zero variance")
        se_sum = math.sqrt(v1[0]) / math.sqrt(sample.n2) + math.sqrt(v2[0]) / math.sqrt(sample.n3)
        scale += math.sqrt(1.0 - a) / se_sum
    return scale


# ---------------------------------------------------------------------------
# competitors


@dataclass(frozen=True)
class StatisticValue:
    """A statistic together with its reference distribution.

    ``reference`` is ``"normal"`` or ``"t"``; ``df`` is set iff it is ``"t"``.
    """

    value: float
    reference: str = "normal"
    df: Optional[float] = None

    def __post_init__(self):
        if self.reference == "t":
            if self.df is None or not self.df > 0:
                raise PairPermError("Student t reference needs df > 0")
        elif self.reference == "normal":
            if self.df is not None:
                raise PairPermError("normal reference takes no df")
        else:
            raise PairPermError(f"unknown reference {self.reference!r}")


def lin_stivers_statistic(sample: PartiallyPairedSample) -> StatisticValue:
    """Lin-Stivers studentized mean difference, referred to ``t(n - 4)``.

    Arm means pool complete and unpaired observations. The sums of squares
    follow the commonly cited display: ``S1^2`` runs over all first-arm values
    around the pooled first-arm mean, while ``S2^2`` runs over the second-only
    values around their own mean. The statistic is therefore not antisymmetric
    under exchanging the arms.
    """
    n1, n2, n3, n = sample.n1, sample.n2, sample.n3, sample.n
    if n1 < 2:
        raise TooFewObservations(f"Lin-Stivers needs n1 >= 2 for the correlation, got {n1}")
    if n < 5:
        raise TooFewObservations(f"Lin-Stivers needs n >= 5 for n - 4 df, got {n}")
    r = complete_correlation(sample.complete)
    if r is None:
        raise DegenerateDenominator("correlation of the complete pairs is undefined")

    arm1 = np.concatenate([sample.complete[:, 0], sample.first_only])
    arm2 = np.concatenate([sample.complete[:, 1], sample.second_only])
    mean1 = arm1.mean()
    mean2 = arm2.mean()
    s1 = float(np.sum((arm1 - mean1) ** 2))
    s2 = float(np.sum((sample.second_only - sample.second_only.mean()) ** 2)) if n3 else 0.0

    k1 = n2 + n1
    k2 = n3 + n1
    design = 1.0 / k1 + 1.0 / k2 - 2.0 * n1 * r / (k1 * k2)
    pooled = (s1 + s2) / (n - 2)
    if not (design > 0.0 and pooled > 0.0):
        raise DegenerateDenominator("Lin-Stivers denominator is zero")
    value = (mean1 - mean2) / (math.sqrt(design) * math.sqrt(pooled))
    return StatisticValue(float(value), "t", float(n - 4))


def kim_t3_statistic(sample: PartiallyPairedSample) -> StatisticValue:
    """Kim's ``t3``: sizes-weighted paired and unpaired mean differences.

    The unpaired part is weighted by the harmonic mean of ``n2`` and ``n3``.
    """
    n1, n2, n3 = sample.n1, sample.n2, sample.n3
    if n1 < 2 or n2 < 2 or n3 < 2:
        raise TooFewObservations(f"t3 needs n1, n2, n3 >= 2, got ({n1}, {n2}, {n3})")
    n_h = 2.0 / (1.0 / n2 + 1.0 / n3)
    paired_diff = sample.complete[:, 0].mean() - sample.complete[:, 1].mean()
    unpaired_diff = sample.first_only.mean() - sample.second_only.mean()
    var_d = float(np.var(sample.differences, ddof=1))
    var1 = float(np.var(sample.first_only, ddof=1))
    var2 = float(np.var(sample.second_only, ddof=1))
    den2 = n1 * var_d + n_h**2 * (var1 / n2 + var2 / n3)
    if not den2 > 0.0:
        raise DegenerateDenominator("t3 denominator is zero")
    value = (n1 * paired_diff + n_h * unpaired_diff) / math.sqrt(den2)
    return StatisticValue(float(value), "normal")


# ---------------------------------------------------------------------------
# reference distributions


def normal_cdf(x: float) -> float:
    return float(special.ndtr(x))


def normal_sf(x: float) -> float:
    return float(special.ndtr(-x))


def normal_quantile(p: float) -> float:
    return float(special.ndtri(p))


def student_t_sf(x: float, df: float) -> float:
    """Upper tail ``P(T > x)`` of Student's t via the regularized incomplete beta."""
    if math.isinf(df):
        return normal_sf(x)
    tail = 0.5 * float(special.betainc(0.5 * df, 0.5, df / (df + x * x)))
    return tail if x >= 0 else 1.0 - tail


def student_t_quantile(p: float, df: float) -> float:
    return float(special.stdtrit(df, p))


def reference_p_value(stat: StatisticValue, side: Side = "greater") -> float:
    """Tail probability of ``stat.value`` under its reference distribution."""
    check_side(side)
    if stat.reference == "t":
        sf = lambda x: student_t_sf(x, stat.df)  # noqa: E731
    else:
        sf = normal_sf
    if side == "greater":
        return sf(stat.value)
    if side == "less":
        return sf(-stat.value)
    return min(1.0, 2.0 * sf(abs(stat.value)))


def _critical_value(stat: StatisticValue, level: float) -> float:
    if stat.reference == "t":
        return student_t_quantile(1.0 - level, stat.df)
    return normal_quantile(1.0 - level)


@dataclass(frozen=True)
class TestOutcome:
    """Decision of a test against a fixed reference distribution."""

    __test__ = False  # keep pytest from collecting this class

    method: str
    statistic: StatisticValue
    alpha: float
    side: str
    p_value: float
    p_one_sided: float
    p_two_sided: float
    critical_value: float
    reject: bool


def reference_test(method: str, stat: StatisticValue, alpha: float = 0.05, side: Side = "two-sided") -> TestOutcome:
    """Test ``stat`` at level ``alpha`` against its reference distribution."""
    check_side(side)
    if not 0.0 < alpha < 1.0:
        raise PairPermError(f"alpha must lie in (0, 1), got {alpha!r}")
    if side == "two-sided":
        crit = _critical_value(stat, alpha / 2.0)
        reject = abs(stat.value) > crit
    else:
        crit = _critical_value(stat, alpha)
        reject = stat.value > crit if side == "greater" else stat.value < -crit
    return TestOutcome(
        method=method,
        statistic=stat,
        alpha=alpha,
        side=side,
        p_value=reference_p_value(stat, side),
        p_one_sided=reference_p_value(stat, "greater"),
        p_two_sided=reference_p_value(stat, "two-sided"),
        critical_value=crit,
        reject=bool(reject),
    )


def asymptotic_test(
    sample: PartiallyPairedSample,
    rule: Union[WeightRule, float] = WeightRule.PAPER,
    alpha: float = 0.05,
    side: Side = "two-sided",
) -> TestOutcome:
    """Weighted statistic against the standard normal.

    One-sided rejects when ``T > z(1 - alpha)``; two-sided when
    ``|T| > z(1 - alpha / 2)``.
    """
    stat = StatisticValue(weighted_statistic(sample, rule), "normal")
    return reference_test("asymptotic", stat, alpha, side)


def lin_stivers_test(sample, alpha=0.05, side="two-sided") -> TestOutcome:
    return reference_test("lin-stivers", lin_stivers_statistic(sample), alpha, side)


def kim_t3_test(sample, alpha=0.05, side="two-sided") -> TestOutcome:
    return reference_test("kim", kim_t3_statistic(sample), alpha, side)
