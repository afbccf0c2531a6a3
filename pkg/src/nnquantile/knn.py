"""Nearest-neighbour elementary experts.

An expert ``(k, lbar)`` compares the last ``k`` observations with every
earlier window of length ``k``, keeps the ``lbar`` closest (Euclidean
distance, ties to the older window) and forecasts the pinball-optimal
quantile of the values that followed those windows.

Two distance engines produce identical neighbour sets:

* :class:`NaiveEngine` recomputes every candidate distance at each step.
* :class:`IncrementalEngine` updates the squared distances in O(n) per step
  with the sliding-window recurrence and only recomputes exactly the
  handful of candidates close to the selection threshold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import IndexOutOfRange, NoCandidates, UsageError
from .pinball import empirical_quantile
from .types import ExpertKey, QuantileLevel, TruncationPolicy, as_series_array

__all__ = [
    "NeighborSet",
    "NaiveEngine",
    "IncrementalEngine",
    "make_engine",
    "window_distance",
    "neighbor_set",
    "elementary_predict",
    "truncate_prediction",
]


@dataclass(frozen=True)
class NeighborSet:
    """Neighbour times ``t`` (1-based, ascending) and their window distances."""

    indices: Tuple[int, ...]
    distances: Tuple[float, ...]

    def __len__(self):
        return len(self.indices)


def _sq_dist(windows: np.ndarray, query: np.ndarray) -> np.ndarray:
    # Fixed left-to-right accumulation; both engines must round identically.
    acc = np.zeros(windows.shape[0], dtype=np.float64)
    for i in range(query.shape[0]):
        d = windows[:, i] - query[i]
        acc += d * d
    return acc


def _select(d: np.ndarray, count: int, pos: Optional[np.ndarray] = None) -> np.ndarray:
    """Positions of the ``count`` smallest ``d``, ties resolved by position.

    ``pos`` gives the candidate positions of ``d`` in ascending order
    (defaults to ``arange``). The result is in rank order.
    """
    if pos is None:
        pos = np.arange(d.shape[0])
    if 2 * count < d.shape[0]:
        thr = np.partition(d, count - 1)[count - 1]
        keep = np.flatnonzero(d <= thr)
        d, pos = d[keep], pos[keep]
    order = np.argsort(d, kind="stable")[:count]
    return pos[order]


def window_distance(series, t: int, n: int, k: int) -> float:
    """Euclidean distance between ``y_{t-k}^{t-1}`` and ``y_{n-k}^{n-1}`` (1-based)."""
    y = as_series_array(series)
    if not (k >= 1 and k < t < n <= y.shape[0] + 1):
        raise IndexOutOfRange(f"need 1 <= k < t < n <= len+1, got k={k}, t={t}, n={n}")
    a = y[t - k - 1 : t - 1]
    b = y[n - k - 1 : n - 1]
    return float(np.sqrt(_sq_dist(a[None, :], b)[0]))


class NaiveEngine:
    """Reference engine: exact distances to every candidate window at every step."""

    name = "naive"

    def rank(self, y: np.ndarray, n: int, k: int, count: int):
        """Rank the candidate windows for step ``n`` (prefix ``y[:n-1]``).

        Returns ``(t, sq_dist)`` for the ``min(count, n-k-1)`` nearest
        candidates, nearest first, ``t`` 1-based.
        """
        p = n - 1
        m = p - k  # number of candidates
        if m < 1:
            return np.empty(0, dtype=np.int64), np.empty(0)
        windows = sliding_window_view(y[:p], k)[:m]
        d = _sq_dist(windows, y[p - k : p])
        pos = _select(d, min(count, m))
        return pos + k + 1, d[pos]

    def reset(self):
        pass


class IncrementalEngine:
    """Sliding-window engine with per-``k`` caches of approximate squared distances.

    The cache for ``k`` at step ``n`` holds ``D[t]`` for candidates
    ``t = k+1 .. n-1`` and is advanced with

        D_{n+1}(t+1) = D_n(t) + (y_t - y_n)^2 - (y_{t-k} - y_{n-k})^2.

    Approximate values only pre-select candidates; the final ranking uses
    exact distances so results match :class:`NaiveEngine` bit for bit.
    The cache follows one series forward and rebuilds itself when asked for
    a step out of sequence. Instances must not be shared between pipelines.
    """

    name = "incremental"

    def __init__(self, refresh_every: int = 64):
        self.refresh_every = refresh_every
        self.reset()

    def reset(self):
        self._cache: Dict[int, list] = {}  # k -> [n, D, steps_since_refresh]
        self._scale = 0.0
        self._seen = 0

    def _exact_all(self, y, n, k):
        p = n - 1
        m = p - k
        windows = sliding_window_view(y[:p], k)[:m]
        return _sq_dist(windows, y[p - k : p])

    def _advance(self, y, n, k):
        entry = self._cache.get(k)
        m = n - 1 - k
        if entry is None or entry[0] != n - 1 or entry[2] >= self.refresh_every or m < 2:
            D = self._exact_all(y, n, k)
            self._cache[k] = [n, D, 0]
            return D
        _, D, age = entry
        # from step n-1 (query window ending at y_{n-2}) to step n
        ynew = y[n - 2]
        yold = y[n - 2 - k]
        new = np.empty(m)
        e = y[0:k] - y[n - 1 - k : n - 1]
        new[0] = np.dot(e, e)
        a = y[k : n - 2] - ynew
        b = y[0 : n - 2 - k] - yold
        new[1:] = D + (a * a - b * b)
        self._cache[k] = [n, new, age + 1]
        return new

    def rank(self, y: np.ndarray, n: int, k: int, count: int):
        p = n - 1
        m = p - k
        if m < 1:
            return np.empty(0, dtype=np.int64), np.empty(0)
        if p > self._seen:
            self._scale = max(self._scale, float(np.max(np.abs(y[self._seen : p]))))
            self._seen = p
        D = self._advance(y, n, k)
        count = min(count, m)
        if count < m:
            thr = np.partition(D, count - 1)[count - 1]
            margin = 1e-9 * 4.0 * (k + 2) * self._scale * self._scale + 1e-300
            cand = np.flatnonzero(D <= thr + margin)
        else:
            cand = np.arange(m)
        windows = y[cand[:, None] + np.arange(k)]
        d = _sq_dist(windows, y[p - k : p])
        pos = _select(d, count, cand)
        order_d = d[np.searchsorted(cand, pos)]
        return pos + k + 1, order_d


def make_engine(name: str):
    if name == "naive":
        return NaiveEngine()
    if name == "incremental":
        return IncrementalEngine()
    raise UsageError(f"unknown distance engine {name!r}")


def neighbor_set(prefix, k: int, lbar: int, engine: str = "naive") -> NeighborSet:
    """The ``min(lbar, n-k-1)`` nearest windows to the last ``k`` values of ``prefix``.

    ``prefix`` is ``y_1^{n-1}``. Raises :class:`NoCandidates` when no earlier
    window exists.
    """
    y = as_series_array(prefix)
    n = y.shape[0] + 1
    if n - 1 < k + 1:
        raise NoCandidates(f"prefix of length {n - 1} has no candidate window of length {k}")
    t, d = make_engine(engine).rank(y, n, k, lbar)
    order = np.argsort(t)
    return NeighborSet(
        tuple(int(v) for v in t[order]), tuple(float(v) for v in np.sqrt(d[order]))
    )


def elementary_predict(prefix, key: ExpertKey, tau, lbar: Optional[int] = None) -> float:
    """Forecast of expert ``key`` for step ``n = len(prefix) + 1``.

    ``lbar`` overrides ``key.lbar`` (used for fractional grids). Returns 0
    unless ``n > k + lbar + 1``.
    """
    y = as_series_array(prefix, allow_empty=True)
    n = y.shape[0] + 1
    k = key.k
    lbar = key.lbar if lbar is None else lbar
    if lbar < 1 or n <= k + lbar + 1:
        return 0.0
    t, _ = NaiveEngine().rank(y, n, k, lbar)
    return empirical_quantile(y[t - 1], tau)


def truncate_prediction(value: float, n: int, key: ExpertKey, policy: TruncationPolicy) -> float:
    if not policy.enabled:
        return value
    a = policy.bound(n, key)
    return float(min(max(value, -a), a))


class ExpertBank:
    """Evaluates every expert of a grid at one step.

    ``kind`` is ``"quantile"`` (sorted-sample quantile of the successors) or
    ``"mean"`` (their average).
    """

    def __init__(self, grid, tau, kind: str = "quantile", engine: str = "incremental"):
        if kind not in ("quantile", "mean"):
            raise UsageError(f"unknown expert kind {kind!r}")
        self.grid = grid
        self.level = QuantileLevel.of(tau)
        self.kind = kind
        self.engine = make_engine(engine)
        self._ks = np.array([key.k for key in grid.keys], dtype=np.int64)
        self._groups = {int(k): np.flatnonzero(self._ks == k) for k in np.unique(self._ks)}
        self._rank_cache: Dict[int, int] = {}
        self._layouts: Dict[tuple, tuple] = {}
        self._y: Optional[np.ndarray] = None

    def reset(self):
        self.engine.reset()
        self._y = None

    def _rank(self, m):
        r = self._rank_cache.get(m)
        if r is None:
            r = self._rank_cache[m] = self.level.rank(m)
        return r

    def _layout(self, k, lb):
        """Unique neighbour counts of group ``k``, the key-to-unique map and their ranks."""
        cache_key = (k, lb.tobytes())
        hit = self._layouts.get(cache_key)
        if hit is None:
            uniq, inv = np.unique(lb, return_inverse=True)
            ranks = np.array([self._rank(int(u)) - 1 for u in uniq])
            hit = self._layouts[cache_key] = (uniq, inv, ranks)
        return hit

    def predict(self, y: np.ndarray, n: int) -> np.ndarray:
        """Raw (untruncated) predictions of all experts for step ``n`` from ``y[:n-1]``."""
        if self._y is not None and not np.array_equal(self._y, y[: self._y.shape[0]]):
            self.engine.reset()
        self._y = y[: n - 1]
        lbars = self.grid.neighbor_counts(n)
        out = np.zeros(len(self.grid))
        for k, idx in self._groups.items():
            uniq, inv, ranks = self._layout(k, lbars[idx])
            # expert (k, l) is live iff 1 <= l < n - k - 1
            lo = np.searchsorted(uniq, 1)
            hi = np.searchsorted(uniq, n - k - 1)
            if hi <= lo:
                continue
            t, _ = self.engine.rank(y, n, k, int(uniq[hi - 1]))
            succ = y[t - 1]
            u = uniq[lo:hi]
            if self.kind == "mean":
                vals = np.cumsum(succ)[u - 1] / u
            else:
                L = succ.shape[0]
                mat = np.where(np.arange(L)[None, :] < u[:, None], succ[None, :], np.inf)
                mat.sort(axis=1)
                vals = mat[np.arange(u.shape[0]), ranks[lo:hi]]
            live = (inv >= lo) & (inv < hi)
            out[idx[live]] = vals[inv[live] - lo]
        return out
