"""Competitor forecasters: moving averages, AR / quantile AR, Holt-Winters,
and the conditional-mean expert mixture."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .aggregator import SequenceResult, run_sequence
from .exceptions import (
    NoSameWeekdayHistory,
    RankDeficient,
    SeriesTooShort,
    UsageError,
    WrongLagCount,
)
from .pinball import pinball_loss
from .types import EtaSchedule, ExpertGrid, QuantileLevel, TruncationPolicy, as_series_array

__all__ = [
    "LinearModel",
    "HoltWintersModel",
    "ma_predict",
    "dow_ma_predict",
    "ar_fit",
    "ar_predict",
    "qar_fit_irls",
    "qar_objective",
    "holt_winters_fit",
    "hw_predict",
    "mem_run",
]


def ma_predict(prefix, window: int = 7) -> float:
    """Mean of the last ``min(window, len(prefix))`` observations."""
    y = as_series_array(prefix)
    if window < 1:
        raise UsageError("window must be positive")
    return float(np.mean(y[-window:]))


def dow_ma_predict(prefix, period: int = 7, window: Optional[int] = None) -> float:
    """Mean of the last ``window`` observations sharing the target's phase.

    The target is ``n = len(prefix) + 1``; the matching indices are
    ``t < n`` with ``t = n (mod period)``. ``window=None`` uses all of them.
    """
    y = as_series_array(prefix)
    if period < 1:
        raise UsageError("period must be positive")
    n = y.shape[0] + 1
    # 0-based positions congruent to n-1 (mod period), all before n-1
    same = y[(n - 1) % period :: period]
    if same.shape[0] == 0:
        raise NoSameWeekdayHistory(f"no past observation congruent to {n} mod {period}")
    if window is not None:
        if window < 1:
            raise UsageError("window must be positive")
        same = same[-window:]
    return float(np.mean(same))


@dataclass(frozen=True)
class LinearModel:
    """``y_t = intercept + sum_i coefficients[i-1] * y_{t-i}``."""

    intercept: float
    coefficients: Tuple[float, ...]
    converged: bool = True
    iterations: int = 0

    @property
    def order(self) -> int:
        return len(self.coefficients)


def _lag_design(y, p):
    n = y.shape[0]
    if p < 1:
        raise UsageError("order must be at least 1")
    if n < p + 2:
        raise SeriesTooShort(f"need at least {p + 2} observations for order {p}, got {n}")
    X = np.empty((n - p, p + 1))
    X[:, 0] = 1.0
    for i in range(1, p + 1):
        X[:, i] = y[p - i : n - i]
    return X, y[p:]


def _lstsq(X, target, weights=None):
    if weights is not None:
        sw = np.sqrt(weights)
        X = X * sw[:, None]
        target = target * sw
    beta, _, rank, sv = np.linalg.lstsq(X, target, rcond=None)
    if rank < X.shape[1]:
        raise RankDeficient("design matrix is rank deficient")
    return beta


def ar_fit(series, p: int) -> LinearModel:
    """Ordinary least squares AR(p) with intercept.

    Raises :class:`RankDeficient` instead of regularising a singular design
    (e.g. a constant series).
    """
    X, target = _lag_design(as_series_array(series), p)
    beta = _lstsq(X, target)
    return LinearModel(float(beta[0]), tuple(float(b) for b in beta[1:]))


def ar_predict(model: LinearModel, last) -> float:
    """One-step forecast from the last ``p`` values, oldest first."""
    last = np.asarray(last, dtype=np.float64).ravel()
    if last.shape[0] != model.order:
        raise WrongLagCount(f"expected {model.order} lagged values, got {last.shape[0]}")
    # coefficients[0] multiplies the most recent value
    return float(model.intercept + np.dot(model.coefficients, last[::-1]))


def qar_objective(series, model: LinearModel, tau) -> float:
    """In-sample pinball objective of a linear autoregression."""
    X, target = _lag_design(as_series_array(series), model.order)
    beta = np.r_[model.intercept, model.coefficients]
    return float(np.sum(pinball_loss(target - X @ beta, tau)))


def qar_fit_irls(
    series,
    p: int,
    tau=0.5,
    epsilon: float = 1e-6,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> LinearModel:
    """Quantile autoregression fitted by iteratively reweighted least squares.

    Starts from OLS and solves weighted least squares with weights
    ``|tau - 1[r <= 0]| / max(|r|, epsilon)`` until the largest coefficient
    change drops below ``tol``. The iterate with the smallest pinball
    objective is returned, so the result never does worse than the OLS
    start. ``converged`` on the returned model is False when ``max_iter``
    was exhausted.
    """
    level = QuantileLevel.of(tau)
    t = level.value
    X, target = _lag_design(as_series_array(series), p)
    beta = _lstsq(X, target)

    def objective(b):
        return math.fsum(pinball_loss(target - X @ b, level))

    best, best_obj = beta, objective(beta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r = target - X @ beta
        w = np.where(r <= 0, 1.0 - t, t) / np.maximum(np.abs(r), epsilon)
        try:
            new = _lstsq(X, target, w)
        except RankDeficient:
            break
        obj = objective(new)
        if obj < best_obj:
            best, best_obj = new, obj
        step = np.max(np.abs(new - beta))
        beta = new
        if step < tol:
            converged = True
            break
    return LinearModel(float(best[0]), tuple(float(b) for b in best[1:]), converged, it)


@dataclass(frozen=True)
class HoltWintersModel:
    """Fitted additive Holt-Winters state.

    ``seasonals[j]`` is the component of 0-based positions congruent to ``j``
    modulo ``season_length``; ``next_index`` is the 0-based position of the
    value to forecast.
    """

    alpha: float
    beta: float
    gamma: float
    season_length: int
    level: float
    trend: float
    seasonals: Tuple[float, ...]
    next_index: int
    mse: float = 0.0


def _hw_run(y, s, alpha, beta, gamma):
    """Vectorised additive Holt-Winters over parameter arrays.

    Returns final (level, trend, seasonals) and the in-sample one-step
    squared errors summed over positions ``s .. n-1``.
    """
    first = y[:s]
    mean0 = first.mean()
    trend0 = (y[s : 2 * s].mean() - mean0) / s
    # the first-season mean sits at its midpoint; carry it to the season's end
    offsets = trend0 * (np.arange(s) - (s - 1) / 2.0)
    level0 = mean0 + offsets[-1]
    P = alpha.shape[0]
    level = np.full(P, level0)
    trend = np.full(P, trend0)
    seas = np.tile(first - mean0 - offsets, (P, 1))
    sse = np.zeros(P)
    for i in range(s, y.shape[0]):
        j = i % s
        sj = seas[:, j]
        err = y[i] - (level + trend + sj)
        sse += err * err
        new_level = alpha * (y[i] - sj) + (1.0 - alpha) * (level + trend)
        trend = beta * (new_level - level) + (1.0 - beta) * trend
        seas[:, j] = gamma * (y[i] - new_level) + (1.0 - gamma) * sj
        level = new_level
    return level, trend, seas, sse


def holt_winters_fit(series, season_length: int = 7, grid_step: float = 0.1) -> HoltWintersModel:
    """Additive Holt-Winters with smoothing parameters chosen on a lattice.

    Initial trend is the difference of the first two season means divided
    by the season length. The first-season mean, advanced along that trend
    to the last position of the season, gives the initial level; initial
    seasonals are the first-season deviations from the same trend line. ``(alpha, beta, gamma)``
    ranges over ``{0, g, 2g, ..., 1}^3`` and the triple with the smallest
    in-sample one-step mean squared error wins; ties go to the
    lexicographically smallest triple.
    """
    y = as_series_array(series)
    s = int(season_length)
    if s < 1:
        raise UsageError("season_length must be positive")
    if y.shape[0] < 2 * s:
        raise SeriesTooShort(f"need at least {2 * s} observations, got {y.shape[0]}")
    if not 0 < grid_step <= 1:
        raise UsageError("grid_step must lie in (0, 1]")
    steps = int(round(1.0 / grid_step))
    axis = np.linspace(0.0, 1.0, steps + 1)
    a, b, g = (m.ravel() for m in np.meshgrid(axis, axis, axis, indexing="ij"))
    level, trend, seas, sse = _hw_run(y, s, a, b, g)
    best = int(np.argmin(sse))  # first minimum = lexicographically smallest triple
    n_err = y.shape[0] - s
    nxt = y.shape[0]
    return HoltWintersModel(
        float(a[best]),
        float(b[best]),
        float(g[best]),
        s,
        float(level[best]),
        float(trend[best]),
        tuple(float(v) for v in seas[best]),
        nxt,
        float(sse[best] / n_err) if n_err else 0.0,
    )


def hw_predict(model: HoltWintersModel) -> float:
    """level + trend + seasonal component of the next index."""
    j = model.next_index % model.season_length
    return model.level + model.trend + model.seasonals[j]


def mem_run(
    series,
    grid: ExpertGrid,
    eta: Optional[EtaSchedule] = None,
    truncation: Optional[TruncationPolicy] = None,
    *,
    engine: str = "incremental",
    keep_records: bool = True,
) -> SequenceResult:
    """Mixture of nearest-neighbour mean experts weighted by squared error."""
    return run_sequence(
        series, grid, 0.5, eta, truncation, loss="squared", engine=engine, keep_records=keep_records
    )
