"""Evaluation metrics for one-step quantile forecasts.

Sums use :func:`math.fsum`, so every metric is exactly invariant to the
order of the points.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import EmptyInput, LengthMismatch
from .pinball import pinball_loss

__all__ = [
    "MetricsReport",
    "pinball_metric",
    "ramp_metric",
    "error_metrics",
    "metrics_report",
]


def _pair(preds, obs):
    p = np.asarray(preds, dtype=np.float64).ravel()
    o = np.asarray(obs, dtype=np.float64).ravel()
    if p.shape != o.shape:
        raise LengthMismatch(f"{p.shape[0]} predictions vs {o.shape[0]} observations")
    if p.size == 0:
        raise EmptyInput("no points to score")
    return p, o


def pinball_metric(preds, obs, tau) -> float:
    """Average pinball loss of ``obs - preds``."""
    p, o = _pair(preds, obs)
    return math.fsum(pinball_loss(o - p, tau)) / p.size


def ramp_metric(preds, obs) -> float:
    """Fraction of observations strictly above their forecast (target ``1 - tau``)."""
    p, o = _pair(preds, obs)
    return int(np.count_nonzero(o > p)) / p.size


def error_metrics(preds, obs):
    """``(avg_abs, avg_sqr, mape_pct, abs_std_dev, mape_excluded)``.

    MAPE skips zero observations and reports how many were skipped (it is
    0.0 when every observation is zero). The standard deviation of the
    absolute errors uses the population convention.
    """
    p, o = _pair(preds, obs)
    e = np.abs(o - p)
    n = e.size
    avg_abs = math.fsum(e) / n
    avg_sqr = math.fsum(e * e) / n
    nz = o != 0
    excluded = int(n - np.count_nonzero(nz))
    mape = 100.0 * math.fsum(e[nz] / np.abs(o[nz])) / (n - excluded) if n > excluded else 0.0
    dev = e - avg_abs
    std = math.sqrt(math.fsum(dev * dev) / n)
    return avg_abs, avg_sqr, mape, std, excluded


@dataclass(frozen=True)
class MetricsReport:
    pinball: float
    ramp: float
    avg_abs: float
    avg_sqr: float
    mape_pct: float
    abs_std_dev: float
    n_points: int
    mape_excluded: int = 0
    excluded_points: int = 0

    def as_dict(self):
        return asdict(self)


def metrics_report(preds, obs, tau, excluded_points: int = 0) -> MetricsReport:
    avg_abs, avg_sqr, mape, std, mape_excl = error_metrics(preds, obs)
    return MetricsReport(
        pinball=pinball_metric(preds, obs, tau),
        ramp=ramp_metric(preds, obs),
        avg_abs=avg_abs,
        avg_sqr=avg_sqr,
        mape_pct=mape,
        abs_std_dev=std,
        n_points=len(preds),
        mape_excluded=mape_excl,
        excluded_points=excluded_points,
    )
