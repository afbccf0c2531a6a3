"""Exponentially weighted aggregation of nearest-neighbour experts.

The state is advanced by an explicit ``predict`` / ``update`` cycle:

>>> state = AggregatorState(uniform_grid(2, 3), tau=0.5)
>>> rec = predict(state, [])          # step 1, empty history
>>> state = update(state, 1.7)
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .exceptions import PredictionMissing, UsageError
from .knn import ExpertBank
from .pinball import pinball_loss
from .types import (
    EtaSchedule,
    ExpertGrid,
    QuantileLevel,
    TruncationPolicy,
    as_series_array,
)

__all__ = [
    "PredictionRecord",
    "AggregatorState",
    "SequenceResult",
    "compute_weights",
    "predict",
    "update",
    "run_sequence",
    "regret_bound",
]


@dataclass(frozen=True)
class PredictionRecord:
    step: int
    expert_predictions: np.ndarray
    weights: np.ndarray
    aggregate: float


class AggregatorState:
    """Mutable single-owner state of the mixture.

    ``raw_loss[i]`` is the sum of the losses of expert ``i`` over steps
    ``1 .. step-1``. ``loss`` selects the per-expert loss: ``"pinball"`` for
    the quantile mixture, ``"squared"`` for the conditional-mean mixture
    (which also switches experts to successor means).
    """

    def __init__(
        self,
        grid: ExpertGrid,
        tau=0.5,
        eta: Optional[EtaSchedule] = None,
        truncation: Optional[TruncationPolicy] = None,
        loss: str = "pinball",
        engine: str = "incremental",
    ):
        if loss not in ("pinball", "squared"):
            raise UsageError(f"unknown loss {loss!r}")
        self.grid = grid
        self.tau = QuantileLevel.of(tau)
        self.eta = eta or EtaSchedule()
        self.truncation = truncation or TruncationPolicy()
        self.loss = loss
        self.step = 1
        self.raw_loss = np.zeros(len(grid))
        self.last_prediction: Optional[np.ndarray] = None
        self._bank = ExpertBank(
            grid, self.tau, kind="quantile" if loss == "pinball" else "mean", engine=engine
        )
        if self.truncation.enabled:
            self._caps = np.array([float(self.truncation.cap_rule(k)) for k in grid.keys])

    @property
    def keys(self):
        return self.grid.keys

    def _losses(self, y, preds):
        r = y - preds
        if self.loss == "squared":
            return r * r
        return pinball_loss(r, self.tau)


def compute_weights(state: AggregatorState) -> np.ndarray:
    """Normalised exponential weights for the current step.

    The exponent is shifted so its largest value is 0; the shift cancels in
    the normalisation.
    """
    x = state.eta(state.step) * state.raw_loss
    s = x.min()
    if np.all(x == s):
        return state.grid.prior.copy()
    w = state.grid.prior * np.exp(-(x - s))
    return w / w.sum()


def predict(state: AggregatorState, prefix) -> PredictionRecord:
    """Evaluate all experts on ``prefix = y_1^{n-1}`` and combine them."""
    y = as_series_array(prefix, allow_empty=True)
    n = state.step
    if y.shape[0] < n - 1:
        raise UsageError(f"step {n} needs {n - 1} past observations, got {y.shape[0]}")
    preds = state._bank.predict(y, n)
    if state.truncation.enabled:
        a = np.minimum(float(n) ** state.truncation.delta, state._caps)
        preds = np.clip(preds, -a, a)
    p = compute_weights(state)
    state.last_prediction = preds
    return PredictionRecord(n, preds, p, float(np.dot(p, preds)))


def update(state: AggregatorState, y_n: float) -> AggregatorState:
    """Add the step-``n`` losses of every expert and move to step ``n + 1``."""
    if state.last_prediction is None:
        raise PredictionMissing()
    state.raw_loss = state.raw_loss + state._losses(float(y_n), state.last_prediction)
    state.last_prediction = None
    state.step += 1
    return state


@dataclass
class SequenceResult:
    """Trajectory of one pass over a series.

    ``expert_losses`` and ``aggregate_loss`` are averages over the ``n``
    steps. ``aggregate_predictions[t-1]`` is the forecast of ``y_t``.
    """

    records: List[PredictionRecord]
    aggregate_predictions: np.ndarray
    expert_losses: np.ndarray
    aggregate_loss: float
    observed: np.ndarray
    state: AggregatorState = field(repr=False)


def run_sequence(
    series,
    grid: ExpertGrid,
    tau=0.5,
    eta: Optional[EtaSchedule] = None,
    truncation: Optional[TruncationPolicy] = None,
    *,
    loss: str = "pinball",
    engine: str = "incremental",
    keep_records: bool = True,
) -> SequenceResult:
    """Run predict/update over ``y_1 .. y_n``."""
    y = as_series_array(series)
    state = AggregatorState(grid, tau, eta, truncation, loss=loss, engine=engine)
    records = []
    agg = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        rec = predict(state, y[:i])
        agg[i] = rec.aggregate
        if keep_records:
            records.append(rec)
        update(state, y[i])
    n = y.shape[0]
    r = y - agg
    agg_losses = r * r if loss == "squared" else pinball_loss(r, state.tau)
    return SequenceResult(
        records,
        agg,
        state.raw_loss / n,
        math.fsum(agg_losses) / n,
        y,
        state,
    )


def regret_bound(result: SequenceResult) -> float:
    """Right-hand side of the exponential-weights regret inequality at the final step.

    ``min_i (L_n(h_i) - 2 ln b_i / (n eta_{n+1}))
    + (1 / 2n) sum_t eta_t sum_i p_{i,t} loss_{i,t}^2``.
    Requires a result produced with ``keep_records=True``.
    """
    state = result.state
    n = result.observed.shape[0]
    if len(result.records) != n:
        raise UsageError("regret_bound needs the full trajectory (keep_records=True)")
    prior = state.grid.prior
    first = np.min(result.expert_losses - 2.0 * np.log(prior) / (n * state.eta(n + 1)))
    quad = 0.0
    for rec, y in zip(result.records, result.observed):
        lt = state._losses(y, rec.expert_predictions)
        quad += state.eta(rec.step) * float(np.dot(rec.weights, lt * lt))
    return float(first + quad / (2.0 * n))
