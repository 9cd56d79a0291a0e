"""One-parameter exponential-family observation models.

Five families cover the data types that show up in financial and count
time series, all in the *mean* parameterization (the parameter ``theta``
is always ``E[Y]``):

====================  =========================  ==================
family                observation law            theta domain
====================  =========================  ==================
``gaussian``          N(theta, sigma^2)          real
``volatility``        theta * eps^2, eps~N(0,1)  theta > 0
``poisson``           Poisson(theta)             theta > 0
``exponential``       Exp(mean theta)            theta > 0
``bernoulli``         Bernoulli(theta)           0 < theta < 1
====================  =========================  ==================

The volatility law is the distribution of squared log-returns under a
locally constant variance: Y = theta * eps^2 is gamma with shape 1/2 and
scale 2*theta, so E[Y] = theta.

For every family the MLE over a window is the sample mean, and the
maximized log-likelihood ratio against a fixed ``theta`` collapses to
``N * kl(mle, theta)`` where ``kl`` is the Kullback-Leibler divergence
between the two parameter values.  That identity is what the adaptive
procedures test, so both ``kl`` and ``log_density`` are exposed and kept
consistent with each other.

Sample means that land on the boundary of the domain (an all-zero
Bernoulli window, say) are clamped into the open domain by ``EPS_CLAMP``
so that every downstream divergence stays finite.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.special import gammaln

from .errors import (
    DomainViolationError,
    EmptyWindowError,
    InvalidArgumentError,
    SupportViolationError,
)
from .rng import as_generator

#: Boundary clamp for maximum-likelihood estimates.
EPS_CLAMP = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


def _scalar_or_array(out, *inputs):
    """Return float when every input is scalar, ndarray otherwise."""
    if all(np.ndim(x) == 0 for x in inputs):
        return float(out)
    return np.asarray(out)


class Family(ABC):
    """Abstract observation model; concrete families are frozen dataclasses."""

    name: ClassVar[str]

    # ------------------------------------------------------------------
    # validation
    # ------------------------------------------------------------------

    @abstractmethod
    def _theta_ok(self, theta: np.ndarray) -> np.ndarray:
        """Elementwise domain predicate (finiteness already checked)."""

    @abstractmethod
    def _support_ok(self, y: np.ndarray) -> np.ndarray:
        """Elementwise support predicate (finiteness already checked)."""

    def check_theta(self, theta) -> None:
        arr = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(arr)) or not np.all(self._theta_ok(arr)):
            raise DomainViolationError(
                f"parameter outside the {self.name} domain: {theta!r}"
            )

    def check_support(self, values) -> None:
        arr = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(arr)) or not np.all(self._support_ok(arr)):
            raise SupportViolationError(
                f"observation outside the {self.name} support"
            )

    def _window(self, values) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(values, dtype=float))
        if arr.ndim != 1:
            raise InvalidArgumentError("observation window must be 1-D")
        if arr.size == 0:
            raise EmptyWindowError("observation window is empty")
        self.check_support(arr)
        return arr

    # ------------------------------------------------------------------
    # estimation and divergences
    # ------------------------------------------------------------------

    @abstractmethod
    def clamp(self, theta):
        """Project a sample mean into the open parameter domain."""

    def mle(self, window) -> float:
        """Maximum-likelihood estimate over a window: the clamped sample mean."""
        arr = self._window(window)
        return self.clamp(float(arr.mean()))

    @abstractmethod
    def kl(self, theta_a, theta_b):
        """Kullback-Leibler divergence K(theta_a, theta_b), vectorized."""

    @abstractmethod
    def log_density(self, theta, y):
        """Log density (or mass) of ``y`` under parameter ``theta``."""

    def fitted_lr(self, window, theta) -> float:
        """Maximized log-likelihood ratio of the window against ``theta``.

        Equals ``N * kl(mle(window), theta)``; for windows whose raw mean is
        interior this coincides with the direct sum of log-density
        differences.
        """
        arr = self._window(window)
        self.check_theta(theta)
        theta_hat = self.clamp(float(arr.mean()))
        return float(arr.size * self.kl(theta_hat, theta))

    # ------------------------------------------------------------------
    # natural-parameter scale (used by stagewise aggregation)
    # ------------------------------------------------------------------

    @abstractmethod
    def to_natural(self, theta):
        """Map the mean parameter to the aggregation (natural) scale."""

    @abstractmethod
    def from_natural(self, v):
        """Inverse of :meth:`to_natural`."""

    # ------------------------------------------------------------------
    # sampling
    # ------------------------------------------------------------------

    @abstractmethod
    def _sample(self, rng: np.random.Generator, theta: float, size):
        """Draw from the law; no validation."""

    def sample(self, theta, n: int, seed) -> np.ndarray:
        """Draw ``n`` i.i.d. observations; deterministic given ``seed``."""
        self.check_theta(theta)
        if n < 1:
            raise InvalidArgumentError("sample size must be >= 1")
        rng = as_generator(seed)
        return np.asarray(self._sample(rng, float(theta), int(n)), dtype=float)

    # ------------------------------------------------------------------
    # serialization
    # ------------------------------------------------------------------

    def to_config(self) -> dict:
        return {"kind": self.name}


@dataclass(frozen=True)
class Gaussian(Family):
    """Gaussian shifts with fixed, known standard deviation."""

    sigma: float = 1.0
    name: ClassVar[str] = "gaussian"

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise DomainViolationError("gaussian sigma must be positive")

    def _theta_ok(self, theta):
        return np.ones_like(theta, dtype=bool)

    def _support_ok(self, y):
        return np.ones_like(y, dtype=bool)

    def clamp(self, theta):
        return theta

    def kl(self, theta_a, theta_b):
        self.check_theta(theta_a)
        self.check_theta(theta_b)
        a, b = np.asarray(theta_a, float), np.asarray(theta_b, float)
        out = (a - b) ** 2 / (2.0 * self.sigma**2)
        return _scalar_or_array(out, theta_a, theta_b)

    def log_density(self, theta, y):
        self.check_theta(theta)
        self.check_support(y)
        z = (np.asarray(y, float) - np.asarray(theta, float)) / self.sigma
        out = -0.5 * z**2 - math.log(self.sigma) - 0.5 * _LOG_2PI
        return _scalar_or_array(out, theta, y)

    def to_natural(self, theta):
        return theta

    def from_natural(self, v):
        return v

    def _sample(self, rng, theta, size):
        return rng.normal(theta, self.sigma, size)

    def to_config(self):
        return {"kind": self.name, "sigma": self.sigma}


@dataclass(frozen=True)
class Volatility(Family):
    """Squared returns Y = theta * eps^2 with standard normal eps.

    Equivalently gamma(shape 1/2, scale 2*theta); the density is unbounded
    at y = 0, so ``log_density`` returns ``+inf`` there (y = 0 stays an
    admissible observation).
    """

    name: ClassVar[str] = "volatility"

    def _theta_ok(self, theta):
        return theta > 0

    def _support_ok(self, y):
        return y >= 0

    def clamp(self, theta):
        out = np.maximum(theta, EPS_CLAMP)
        return _scalar_or_array(out, theta)

    def kl(self, theta_a, theta_b):
        self.check_theta(theta_a)
        self.check_theta(theta_b)
        ratio = np.asarray(theta_a, float) / np.asarray(theta_b, float)
        out = 0.5 * (ratio - 1.0 - np.log(ratio))
        return _scalar_or_array(out, theta_a, theta_b)

    def log_density(self, theta, y):
        self.check_theta(theta)
        self.check_support(y)
        th = np.asarray(theta, float)
        yy = np.asarray(y, float)
        with np.errstate(divide="ignore"):
            out = -0.5 * (_LOG_2PI + np.log(th) + np.log(yy)) - yy / (2.0 * th)
        return _scalar_or_array(out, theta, y)

    def to_natural(self, theta):
        return 1.0 / theta

    def from_natural(self, v):
        return 1.0 / v

    def _sample(self, rng, theta, size):
        return theta * rng.standard_normal(size) ** 2


@dataclass(frozen=True)
class Poisson(Family):
    """Poisson counts with mean theta."""

    name: ClassVar[str] = "poisson"

    def _theta_ok(self, theta):
        return theta > 0

    def _support_ok(self, y):
        return (y >= 0) & (y == np.floor(y))

    def clamp(self, theta):
        out = np.maximum(theta, EPS_CLAMP)
        return _scalar_or_array(out, theta)

    def kl(self, theta_a, theta_b):
        self.check_theta(theta_a)
        self.check_theta(theta_b)
        a, b = np.asarray(theta_a, float), np.asarray(theta_b, float)
        out = a * np.log(a / b) - a + b
        return _scalar_or_array(out, theta_a, theta_b)

    def log_density(self, theta, y):
        self.check_theta(theta)
        self.check_support(y)
        th = np.asarray(theta, float)
        yy = np.asarray(y, float)
        out = yy * np.log(th) - th - gammaln(yy + 1.0)
        return _scalar_or_array(out, theta, y)

    def to_natural(self, theta):
        return np.log(theta)

    def from_natural(self, v):
        return np.exp(v)

    def _sample(self, rng, theta, size):
        return rng.poisson(theta, size).astype(float)


@dataclass(frozen=True)
class Exponential(Family):
    """Exponential waiting times with mean theta."""

    name: ClassVar[str] = "exponential"

    def _theta_ok(self, theta):
        return theta > 0

    def _support_ok(self, y):
        return y >= 0

    def clamp(self, theta):
        out = np.maximum(theta, EPS_CLAMP)
        return _scalar_or_array(out, theta)

    def kl(self, theta_a, theta_b):
        self.check_theta(theta_a)
        self.check_theta(theta_b)
        ratio = np.asarray(theta_a, float) / np.asarray(theta_b, float)
        out = ratio - 1.0 - np.log(ratio)
        return _scalar_or_array(out, theta_a, theta_b)

    def log_density(self, theta, y):
        self.check_theta(theta)
        self.check_support(y)
        th = np.asarray(theta, float)
        out = -np.log(th) - np.asarray(y, float) / th
        return _scalar_or_array(out, theta, y)

    def to_natural(self, theta):
        return 1.0 / theta

    def from_natural(self, v):
        return 1.0 / v

    def _sample(self, rng, theta, size):
        return rng.exponential(theta, size)


@dataclass(frozen=True)
class Bernoulli(Family):
    """Bernoulli indicators with success probability theta."""

    name: ClassVar[str] = "bernoulli"

    def _theta_ok(self, theta):
        return (theta > 0) & (theta < 1)

    def _support_ok(self, y):
        return (y == 0) | (y == 1)

    def clamp(self, theta):
        out = np.clip(theta, EPS_CLAMP, 1.0 - EPS_CLAMP)
        return _scalar_or_array(out, theta)

    def kl(self, theta_a, theta_b):
        self.check_theta(theta_a)
        self.check_theta(theta_b)
        a, b = np.asarray(theta_a, float), np.asarray(theta_b, float)
        out = a * np.log(a / b) + (1.0 - a) * np.log((1.0 - a) / (1.0 - b))
        return _scalar_or_array(out, theta_a, theta_b)

    def log_density(self, theta, y):
        self.check_theta(theta)
        self.check_support(y)
        th = np.asarray(theta, float)
        yy = np.asarray(y, float)
        out = yy * np.log(th) + (1.0 - yy) * np.log(1.0 - th)
        return _scalar_or_array(out, theta, y)

    def to_natural(self, theta):
        return np.log(theta / (1.0 - theta))

    def from_natural(self, v):
        return 1.0 / (1.0 + np.exp(-np.asarray(v, float))) if np.ndim(v) \
            else 1.0 / (1.0 + math.exp(-v))

    def _sample(self, rng, theta, size):
        return rng.binomial(1, theta, size).astype(float)


FAMILIES = {
    "gaussian": Gaussian,
    "volatility": Volatility,
    "poisson": Poisson,
    "exponential": Exponential,
    "bernoulli": Bernoulli,
}


def get_family(name: str, **kwargs) -> Family:
    """Instantiate a family by name (``sigma=`` applies to gaussian only)."""
    try:
        cls = FAMILIES[name.lower()]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown family {name!r}; choose from {sorted(FAMILIES)}"
        ) from None
    return cls(**kwargs)


def family_from_config(config: dict) -> Family:
    """Rebuild a family from its :meth:`Family.to_config` dictionary."""
    cfg = dict(config)
    kind = cfg.pop("kind")
    return get_family(kind, **cfg)


def parametric_risk_bound(
    family: Family,
    theta_star: float,
    n: int,
    r: float,
    m_reps: int,
    seed,
) -> float:
    """Monte Carlo moment of the fitted likelihood ratio under homogeneity.

    Estimates ``E |N * K(theta_hat, theta_star)|^r`` over windows of length
    ``n`` drawn i.i.d. from the model at ``theta_star``.  This is the
    normalizer that turns the test level into per-step risk budgets during
    critical-value calibration.
    """
    family.check_theta(theta_star)
    if r <= 0:
        raise InvalidArgumentError("risk power r must be > 0")
    if n < 1:
        raise InvalidArgumentError("window length must be >= 1")
    if m_reps < 100:
        raise InvalidArgumentError("need at least 100 replications")
    rng = as_generator(seed)
    draws = np.asarray(family._sample(rng, float(theta_star), (m_reps, n)), float)
    theta_hat = family.clamp(draws.mean(axis=1))
    lr = n * family.kl(theta_hat, theta_star)
    return float(np.mean(lr**r))
