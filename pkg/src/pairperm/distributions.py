"""Data generators for simulation studies.

Complete pairs are ``R @ (e1, e2) + (mu1, mu2)`` where ``R`` is the symmetric
square root of the covariance matrix and ``e1``, ``e2`` are independent
standardized errors from one of four families. Unpaired observations are
``sigma_i * e + mu_i`` with fresh errors. The second-arm mean is
``mu1 + delta``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PairPermError
from .sample import PartiallyPairedSample

MARGINALS = ("normal", "exponential", "laplace", "asymmetric_laplace")

# Asymmetry of the asymmetric Laplace family before standardization.
DEFAULT_AL_KAPPA = 2.0


class NotPositiveDefinite(PairPermError):
    pass


@dataclass(frozen=True)
class CovarianceSpec:
    """2x2 covariance ``[[s1, rho*sqrt(s1*s2)], [rho*sqrt(s1*s2), s2]]``."""

    sigma1_sq: float = 1.0
    sigma2_sq: float = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if not (self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise NotPositiveDefinite("variances must be positive")
        if not -1.0 < self.rho < 1.0:
            raise NotPositiveDefinite(f"rho must lie in (-1, 1), got {self.rho!r}")

    @classmethod
    def homoscedastic(cls, rho: float) -> "CovarianceSpec":
        """Unit variances, correlation ``rho``."""
        return cls(1.0, 1.0, rho)

    @classmethod
    def heteroscedastic(cls, rho: float) -> "CovarianceSpec":
        """Variances 1 and 2, covariance ``sqrt(2) * rho``."""
        return cls(1.0, 2.0, rho)

    @property
    def matrix(self) -> np.ndarray:
        cov = self.rho * math.sqrt(self.sigma1_sq * self.sigma2_sq)
        return np.array([[self.sigma1_sq, cov], [cov, self.sigma2_sq]])


def matrix_sqrt_2x2(spec: CovarianceSpec) -> np.ndarray:
    """Symmetric positive-definite square root of the covariance matrix.

    Uses the closed form ``(S + sqrt(det S) I) / sqrt(tr S + 2 sqrt(det S))``,
    valid for any 2x2 symmetric positive-definite ``S``.
    """
    s = spec.matrix
    det = s[0, 0] * s[1, 1] - s[0, 1] * s[1, 0]
    if not det > 0.0:
        raise NotPositiveDefinite(f"covariance matrix has determinant {det!r}")
    root_det = math.sqrt(det)
    t = math.sqrt(s[0, 0] + s[1, 1] + 2.0 * root_det)
    return (s + root_det * np.eye(2)) / t


def standardized_error(marginal: str, rng: np.random.Generator, size=None, *, kappa: float = DEFAULT_AL_KAPPA):
    """Draw errors with mean 0 and variance 1 from a named family.

    ``exponential`` has rate 1, ``laplace`` location 0 and scale 1, and
    ``asymmetric_laplace`` unit scale with asymmetry ``kappa``: the difference
    of independent exponentials with rates ``kappa`` and ``1 / kappa``. Each
    is centered and scaled by its analytic mean and standard deviation.
    """
    if marginal == "normal":
        return rng.standard_normal(size)
    if marginal == "exponential":
        return rng.standard_exponential(size) - 1.0
    if marginal == "laplace":
        return rng.laplace(0.0, 1.0, size) / math.sqrt(2.0)
    if marginal == "asymmetric_laplace":
        if not kappa > 0:
            raise PairPermError(f"kappa must be positive, got {kappa!r}")
        y = rng.standard_exponential(size) / kappa - kappa * rng.standard_exponential(size)
        mean = 1.0 / kappa - kappa
        sd = math.sqrt(1.0 / kappa**2 + kappa**2)
        return (y - mean) / sd
    raise PairPermError(f"unknown marginal {marginal!r}; choose from {MARGINALS}")


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation setting."""

    marginal: str = "normal"
    covariance: CovarianceSpec = field(default_factory=CovarianceSpec)
    n1: int = 10
    n2: int = 10
    n3: int = 10
    mu1: float = 0.0
    delta: float = 0.0
    kappa: float = DEFAULT_AL_KAPPA

    def __post_init__(self):
        if self.marginal not in MARGINALS:
            raise PairPermError(f"unknown marginal {self.marginal!r}; choose from {MARGINALS}")
        if min(self.n1, self.n2, self.n3) < 0:
            raise PairPermError("sample sizes must be non-negative")

    @property
    def mu2(self) -> float:
        return self.mu1 + self.delta

    def describe(self) -> dict:
        """Flat, JSON-friendly description (also used for stream derivation)."""
        return {
            "marginal": self.marginal,
            "sigma1_sq": self.covariance.sigma1_sq,
            "sigma2_sq": self.covariance.sigma2_sq,
            "rho": self.covariance.rho,
            "n1": self.n1,
            "n2": self.n2,
            "n3": self.n3,
            "mu1": self.mu1,
            "delta": self.delta,
            "kappa": self.kappa,
        }


def generate_sample(config: ScenarioConfig, rng: np.random.Generator) -> PartiallyPairedSample:
    """Draw one partially paired sample with fixed ``n1``, ``n2``, ``n3``."""
    root = matrix_sqrt_2x2(config.covariance)
    err = lambda size: standardized_error(config.marginal, rng, size, kappa=config.kappa)  # noqa: E731
    eps = err((config.n1, 2))
    complete = eps @ root.T + np.array([config.mu1, config.mu2])
    s1 = math.sqrt(config.covariance.sigma1_sq)
    s2 = math.sqrt(config.covariance.sigma2_sq)
    first = s1 * err(config.n2) + config.mu1
    second = s2 * err(config.n3) + config.mu2
    return PartiallyPairedSample(complete, first, second)


def generate_mcar_sample(
    config: ScenarioConfig, n: int, p_missing: float, rng: np.random.Generator
) -> PartiallyPairedSample:
    """Draw ``n`` pairs and delete each component independently with probability ``p_missing``.

    ``config.n1``/``n2``/``n3`` are ignored. Subjects that lose both components
    are dropped.
    """
    if not 0.0 <= p_missing < 1.0:
        raise PairPermError(f"p_missing must lie in [0, 1), got {p_missing!r}")
    full = generate_sample(
        ScenarioConfig(config.marginal, config.covariance, n, 0, 0, config.mu1, config.delta, config.kappa),
        rng,
    )
    missing = rng.random((n, 2)) < p_missing
    both = ~missing[:, 0] & ~missing[:, 1]
    only1 = ~missing[:, 0] & missing[:, 1]
    only2 = missing[:, 0] & ~missing[:, 1]
    return PartiallyPairedSample(
        full.complete[both], full.complete[only1, 0], full.complete[only2, 1]
    )
