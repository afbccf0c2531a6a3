"""Pinball loss and the sorted-sample quantile that minimises it."""
import numpy as np

from .exceptions import EmptySample
from .types import QuantileLevel

__all__ = ["pinball_loss", "pinball_risk", "empirical_quantile", "truncate"]


def pinball_loss(residual, tau):
    """Pinball (check) loss ``r * (tau - 1[r <= 0])``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    t = float(QuantileLevel.of(tau))
    r = np.asarray(residual, dtype=np.float64)
    out = r * np.where(r <= 0, t - 1.0, t)
    return float(out) if out.ndim == 0 else out


def pinball_risk(sample, q, tau):
    """Sum of pinball losses of ``sample - q``."""
    s = np.asarray(sample, dtype=np.float64).ravel()
    if s.size == 0:
        raise EmptySample()
    return float(np.sum(pinball_loss(s - q, tau)))


def empirical_quantile(sample, tau):
    """Element of ``sample`` minimising the pinball risk.

    Returns the ``ceil(m*tau)``-th smallest of the ``m`` points; when
    ``m*tau`` is an integer this is the ``(m*tau)``-th, one of the minimisers.
    The integer test is exact (see :class:`QuantileLevel`).
    """
    level = QuantileLevel.of(tau)
    s = np.asarray(sample, dtype=np.float64).ravel()
    if s.size == 0:
        raise EmptySample()
    r = level.rank(s.size)
    return float(np.partition(s, r - 1)[r - 1])


def truncate(x, a):
    """Clamp to ``[-a, a]``."""
    return np.clip(x, -a, a)
