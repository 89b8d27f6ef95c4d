"""Closed-form parametric time-to-event distributions.

Three families (exponential, Weibull, log-normal) expose the hazard rate
h(t), the survival function S(t) = exp(-H(t)) and the density f(t) = h(t)S(t),
plus sampling. Survival values are computed in log space internally so that
large times do not underflow before the final exponentiation.

Weibull uses the shape/scale parameterization: h(t) = (k / lam) (t / lam)^(k-1).
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _as_array(t, *, minimum_exclusive: float | None = None, minimum: float | None = None):
    t = np.asarray(t, dtype=np.float64)
    if minimum_exclusive is not None and np.any(t <= minimum_exclusive):
        raise ValueError(f"time must be > {minimum_exclusive}")
    if minimum is not None and np.any(t < minimum):
        raise ValueError(f"time must be >= {minimum}")
    return t


class Exponential:
    """Constant-hazard distribution with rate ``lam``."""

    def __init__(self, lam: float):
        if lam <= 0:
            raise ValueError("rate must be strictly positive")
        self.lam = float(lam)

    def hazard(self, t):
        t = _as_array(t, minimum_exclusive=0.0)
        return np.full_like(t, self.lam)

    def log_survival(self, t):
        t = _as_array(t, minimum=0.0)
        return -self.lam * t

    def survival(self, t):
        return np.exp(self.log_survival(t))

    def density(self, t):
        t = _as_array(t, minimum_exclusive=0.0)
        return self.lam * np.exp(-self.lam * t)

    def cdf(self, t):
        return 1.0 - self.survival(t)

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.uniform(size=size)
        return -np.log1p(-u) / self.lam

    def __repr__(self):
        return f"Exponential(lam={self.lam})"


class Weibull:
    """Weibull distribution with shape ``k`` and scale ``lam``.

    Shape 1 degenerates to ``Exponential(1 / lam)``.
    """

    def __init__(self, k: float, lam: float):
        if k <= 0 or lam <= 0:
            raise ValueError("shape and scale must be strictly positive")
        self.k = float(k)
        self.lam = float(lam)

    def hazard(self, t):
        t = _as_array(t, minimum_exclusive=0.0)
        return (self.k / self.lam) * (t / self.lam) ** (self.k - 1.0)

    def log_survival(self, t):
        t = _as_array(t, minimum=0.0)
        return -((t / self.lam) ** self.k)

    def survival(self, t):
        return np.exp(self.log_survival(t))

    def density(self, t):
        t = _as_array(t, minimum_exclusive=0.0)
        log_h = math.log(self.k / self.lam) + (self.k - 1.0) * np.log(t / self.lam)
        return np.exp(log_h + self.log_survival(t))

    def cdf(self, t):
        return -np.expm1(self.log_survival(t))

    def sample(self, rng: np.random.Generator, size=None):
        u = rng.uniform(size=size)
        return self.lam * (-np.log1p(-u)) ** (1.0 / self.k)

    def __repr__(self):
        return f"Weibull(k={self.k}, lam={self.lam})"


class LogNormal:
    """Log-normal distribution: log T ~ Normal(mu, sigma^2).

    ``sigma = 0`` is allowed as a degenerate point mass at exp(mu), useful as
    a deterministic test fixture; hazard and density are undefined there and
    raise.
    """

    def __init__(self, mu: float, sigma: float):
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.mu = float(mu)
        self.sigma = float(sigma)

    def _z(self, t):
        return (np.log(t) - self.mu) / self.sigma

    def hazard(self, t):
        t = _as_array(t, minimum_exclusive=0.0)
        if self.sigma == 0:
            raise ValueError("hazard undefined for degenerate sigma=0")
        z = self._z(t)
        log_f = -0.5 * z * z - LOG_SQRT_2PI - math.log(self.sigma) - np.log(t)
        # h = f / S computed in log space: log S = log Phi(-z)
        return np.exp(log_f - special.log_ndtr(-z))

    def log_survival(self, t):
        t = _as_array(t, minimum=0.0)
        out = np.zeros_like(t)
        pos = t > 0
        if self.sigma == 0:
            with np.errstate(divide="ignore"):
                out[pos] = np.where(np.log(t[pos]) < self.mu, 0.0, -np.inf)
        else:
            out[pos] = special.log_ndtr(-self._z(t[pos]))
        return out

    def survival(self, t):
        return np.exp(self.log_survival(t))

    def density(self, t):
        t = _as_array(t, minimum_exclusive=0.0)
        if self.sigma == 0:
            raise ValueError("density undefined for degenerate sigma=0")
        z = self._z(t)
        return np.exp(-0.5 * z * z - LOG_SQRT_2PI - math.log(self.sigma) - np.log(t))

    def cdf(self, t):
        t = _as_array(t, minimum=0.0)
        out = np.zeros_like(t)
        pos = t > 0
        if self.sigma == 0:
            out[pos] = np.where(np.log(t[pos]) < self.mu, 0.0, 1.0)
        else:
            out[pos] = special.ndtr(self._z(t[pos]))
        return out

    def sample(self, rng: np.random.Generator, size=None):
        return np.exp(self.mu + self.sigma * rng.standard_normal(size=size))

    def __repr__(self):
        return f"LogNormal(mu={self.mu}, sigma={self.sigma})"


FAMILIES = {
    "exponential": Exponential,
    "weibull": Weibull,
    "lognormal": LogNormal,
}


def make_distribution(family: str, **params):
    """Build a distribution from a family name, e.g. from a config file."""
    try:
        cls = FAMILIES[family.lower()]
    except KeyError:
        raise ValueError(
            f"unknown family {family!r}; expected one of {sorted(FAMILIES)}"
        ) from None
    return cls(**params)
