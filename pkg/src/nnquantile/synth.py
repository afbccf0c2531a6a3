"""Seeded synthetic processes and exact oracles for their quantiles and L*.

Random stream
-------------
Uniforms come from numpy's PCG64 bit generator (a documented, platform
independent algorithm) via ``random_raw``: each 64-bit word ``w`` maps to
``((w >> 11) + 0.5) * 2**-53``, strictly inside (0, 1). Standard normal
variates are the inverse normal CDF of those uniforms
(``scipy.special.ndtri``), so one uniform yields exactly one variate and the
stream does not depend on any rejection sampler.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy import integrate
from scipy.special import ndtri

from .exceptions import UnsupportedSpec, UsageError
from .types import QuantileLevel, Series, as_series_array, validate_series

__all__ = [
    "ProcessSpec",
    "uniforms",
    "standard_normals",
    "generate",
    "normal_cdf",
    "gaussian_tau_quantile",
    "lstar_oracle",
    "true_conditional_quantile_path",
]

_KINDS = ("iid_gaussian", "ar1", "seasonal")


@dataclass(frozen=True)
class ProcessSpec:
    """Synthetic process description.

    ``kind`` is one of

    * ``iid_gaussian``: ``y_t = mu + sigma * z_t``
    * ``ar1``: ``y_t = phi * y_{t-1} + sigma * z_t``, started from the
      stationary law ``N(0, sigma^2 / (1 - phi^2))``
    * ``seasonal``: ``y_t = mu + amplitudes[(t-1) % period] + sigma * z_t``
    """

    kind: str
    length: int
    seed: int = 0
    mu: float = 0.0
    sigma: float = 1.0
    phi: float = 0.0
    period: int = 7
    amplitudes: Tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise UsageError(f"unknown process kind {self.kind!r}; choose from {_KINDS}")
        if self.length < 1:
            raise UsageError("length must be at least 1")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise UsageError("sigma must be nonnegative")
        if self.kind == "ar1" and not abs(self.phi) < 1:
            raise UsageError("ar1 requires |phi| < 1")
        if self.kind == "seasonal":
            if self.period < 1:
                raise UsageError("period must be positive")
            amps = tuple(float(a) for a in self.amplitudes) or (0.0,) * self.period
            if len(amps) != self.period:
                raise UsageError("amplitudes must have one entry per period position")
            object.__setattr__(self, "amplitudes", amps)
        if not 0 <= self.seed < 2**64:
            raise UsageError("seed must be a 64-bit unsigned integer")


def uniforms(seed: int, size: int) -> np.ndarray:
    words = np.random.PCG64(seed).random_raw(size)
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def standard_normals(seed: int, size: int) -> np.ndarray:
    return ndtri(uniforms(seed, size))


def generate(spec: ProcessSpec) -> Series:
    """Draw a reproducible realisation of ``spec``."""
    z = standard_normals(spec.seed, spec.length)
    if spec.kind == "iid_gaussian":
        y = spec.mu + spec.sigma * z
    elif spec.kind == "seasonal":
        amps = np.array(spec.amplitudes)
        y = spec.mu + amps[np.arange(spec.length) % spec.period] + spec.sigma * z
    else:
        y = np.empty(spec.length)
        y[0] = spec.sigma / math.sqrt(1.0 - spec.phi**2) * z[0]
        for t in range(1, spec.length):
            y[t] = spec.phi * y[t - 1] + spec.sigma * z[t]
    return validate_series(y)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def gaussian_tau_quantile(tau, mu: float = 0.0, sigma: float = 1.0) -> float:
    """``mu + sigma * z_tau`` with ``z_tau`` found by bisection on the erfc-based CDF."""
    t = QuantileLevel.of(tau).value
    lo, hi = -40.0, 40.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if normal_cdf(mid) < t:
            lo = mid
        else:
            hi = mid
    z = lo if abs(normal_cdf(lo) - t) <= abs(normal_cdf(hi) - t) else hi
    return mu + sigma * z


def _normal_pdf(x):
    return math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)


def _gaussian_pinball_risk(tau, sigma):
    """``E[rho_tau(sigma Z - q_tau)]`` by adaptive quadrature on both half-lines."""
    t = QuantileLevel.of(tau).value
    q = gaussian_tau_quantile(t)
    # substitute x = q - u/(1-u) and x = q + u/(1-u) to map the tails to [0, 1)
    def left(u):
        d = u / (1.0 - u)
        return (1.0 - t) * d * _normal_pdf(q - d) / (1.0 - u) ** 2

    def right(u):
        d = u / (1.0 - u)
        return t * d * _normal_pdf(q + d) / (1.0 - u) ** 2

    a, _ = integrate.quad(left, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    b, _ = integrate.quad(right, 0.0, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200)
    return sigma * (a + b)


def lstar_oracle(spec: ProcessSpec, tau) -> float:
    """Minimal expected pinball loss given the infinite past.

    For i.i.d. Gaussians this is the pinball risk of the true quantile; an
    AR(1) has Gaussian innovations of scale ``sigma`` given the past, so the
    same value applies with that ``sigma``.
    """
    if spec.kind not in ("iid_gaussian", "ar1"):
        raise UnsupportedSpec(f"no L* oracle for {spec.kind!r}")
    return _gaussian_pinball_risk(tau, spec.sigma)


def true_conditional_quantile_path(spec: ProcessSpec, series, tau) -> np.ndarray:
    """Exact conditional tau-quantile of each ``y_t`` given ``y_1^{t-1}``.

    Entry ``t-1`` is ``phi * y_{t-1} + sigma * z_tau`` for ``t >= 2``; the
    first entry is the stationary marginal quantile.
    """
    if spec.kind != "ar1":
        raise UnsupportedSpec("conditional quantile path is only available for ar1")
    y = as_series_array(series)
    z = gaussian_tau_quantile(tau)
    out = np.empty(y.shape[0])
    out[0] = spec.sigma / math.sqrt(1.0 - spec.phi**2) * z
    out[1:] = spec.phi * y[:-1] + spec.sigma * z
    return out
