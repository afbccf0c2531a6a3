"""scikit-learn style forecasters.

Each forecaster is fitted on a history ``y_1 .. y_m`` and predicts the next
value ``y_{m+1}`` (a tau-quantile for the quantile methods, a point forecast
for the others)::

    >>> from nnquantile import QuantileExpertMixture
    >>> model = QuantileExpertMixture(tau=0.9, k_max=3, lbar_max=5).fit(y)
    >>> model.predict()

Hyper-parameters live in ``__init__`` so ``get_params`` / ``set_params`` /
``sklearn.base.clone`` work as usual.
"""
from __future__ import annotations

from typing import Dict, Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.exceptions import NotFittedError

from . import aggregator as agg
from .baselines import (
    ar_fit,
    ar_predict,
    dow_ma_predict,
    holt_winters_fit,
    hw_predict,
    ma_predict,
    qar_fit_irls,
)
from .exceptions import UsageError
from .types import EtaSchedule, ExpertGrid, QuantileLevel, TruncationPolicy, uniform_grid, validate_series

__all__ = [
    "BaseForecaster",
    "QuantileExpertMixture",
    "MeanExpertMixture",
    "MovingAverage",
    "DayOfTheWeekMA",
    "AutoRegressive",
    "QuantileAutoRegressive",
    "HoltWinters",
    "METHODS",
    "make_forecaster",
]


class BaseForecaster(BaseEstimator):
    """Common fit/predict plumbing for one-step forecasters."""

    #: True for methods whose forecasts come out of a single causal pass
    online = False
    quantile = False

    def _check_fitted(self):
        if not hasattr(self, "y_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def fit(self, y, X=None):
        """Fit on the history ``y``; ``X`` is accepted for API symmetry and ignored."""
        self.y_ = validate_series(y).values
        self.n_observations_ = self.y_.shape[0]
        self._fit(self.y_)
        return self

    def predict(self, X=None) -> float:
        """Forecast the observation following the fitted history."""
        self._check_fitted()
        return float(self._predict())

    def _fit(self, y):
        pass

    def forecast_at(self, y, dates: Sequence[int]):
        """Forecasts of ``y_{m+1}`` from ``y_1^m`` for each ``m`` in ``dates``.

        Failed cells come back as the exception instance instead of a float.
        """
        y = validate_series(y).values
        out = []
        for m in dates:
            try:
                out.append(clone(self).fit(y[:m]).predict())
            except (ArithmeticError, ValueError) as exc:
                out.append(exc)
        return out


class _ExpertMixture(BaseForecaster):
    online = True
    _loss = "pinball"

    def _grid(self) -> ExpertGrid:
        if self.grid is not None:
            return self.grid
        return uniform_grid(self.k_max, self.lbar_max)

    def _state_args(self):
        trunc = TruncationPolicy(enabled=bool(self.truncation), delta=self.delta)
        eta = self.eta if isinstance(self.eta, EtaSchedule) else EtaSchedule.parse(self.eta)
        return self._grid(), self._tau(), eta, trunc

    def _tau(self):
        return 0.5

    def _run(self, y, keep_records=False):
        grid, tau, eta, trunc = self._state_args()
        return agg.run_sequence(
            y, grid, tau, eta, trunc, loss=self._loss, engine=self.engine, keep_records=keep_records
        )

    def _fit(self, y):
        res = self._run(y)
        self.state_ = res.state
        self.in_sample_predictions_ = res.aggregate_predictions
        self.expert_losses_ = res.expert_losses
        self.loss_ = res.aggregate_loss
        self.last_record_ = None

    def _predict(self):
        if self.last_record_ is None:
            self.last_record_ = agg.predict(self.state_, self.y_)
        return self.last_record_.aggregate

    @property
    def weights_(self):
        """Current normalised expert weights."""
        self._check_fitted()
        return agg.compute_weights(self.state_)

    def partial_fit(self, y_new):
        """Append observations and advance the mixture without refitting."""
        self._check_fitted()
        for v in validate_series(np.atleast_1d(y_new)).values:
            if self.last_record_ is None:
                agg.predict(self.state_, self.y_)
            agg.update(self.state_, v)
            self.y_ = np.append(self.y_, v)
            self.last_record_ = None
        self.n_observations_ = self.y_.shape[0]
        return self

    def forecast_at(self, y, dates):
        # causal single pass: the forecast of y_{m+1} only sees y_1^m
        y = validate_series(y).values
        if not len(dates):
            return []
        res = self._run(y[: max(dates) + 1])
        return [float(res.aggregate_predictions[m]) for m in dates]


class QuantileExpertMixture(_ExpertMixture):
    """Exponentially weighted mixture of nearest-neighbour quantile experts.

    Parameters
    ----------
    tau : float, default=0.5
        Quantile level in (0, 1).
    k_max, lbar_max : int, default=14, 25
        Experts are all ``(k, lbar)`` with ``k <= k_max`` (window length) and
        ``lbar <= lbar_max`` (number of neighbours); uniform prior.
    eta : str or EtaSchedule, default="inv_sqrt"
        Learning-rate schedule, ``eta_n = sqrt(1/n)`` by default.
    truncation : bool, default=False
        Clamp expert outputs to ``[-min(n**delta, lbar), min(n**delta, lbar)]``.
    delta : float, default=0.2
    engine : {"incremental", "naive"}
        Neighbour-search engine; both give identical results.
    grid : ExpertGrid, optional
        Overrides ``k_max`` / ``lbar_max``.
    """

    quantile = True

    def __init__(
        self,
        tau=0.5,
        k_max=14,
        lbar_max=25,
        eta="inv_sqrt",
        truncation=False,
        delta=0.2,
        engine="incremental",
        grid=None,
    ):
        self.tau = tau
        self.k_max = k_max
        self.lbar_max = lbar_max
        self.eta = eta
        self.truncation = truncation
        self.delta = delta
        self.engine = engine
        self.grid = grid

    def _tau(self):
        return QuantileLevel.of(self.tau)


class MeanExpertMixture(_ExpertMixture):
    """Same mixture with successor-mean experts weighted by cumulative squared error."""

    _loss = "squared"

    def __init__(
        self,
        k_max=14,
        lbar_max=25,
        eta="inv_sqrt",
        truncation=False,
        delta=0.2,
        engine="incremental",
        grid=None,
    ):
        self.k_max = k_max
        self.lbar_max = lbar_max
        self.eta = eta
        self.truncation = truncation
        self.delta = delta
        self.engine = engine
        self.grid = grid


class MovingAverage(BaseForecaster):
    def __init__(self, window=7):
        self.window = window

    def _predict(self):
        return ma_predict(self.y_, self.window)


class DayOfTheWeekMA(BaseForecaster):
    """Average of past values at the same phase of a ``period``-long cycle."""

    def __init__(self, period=7, window=None):
        self.period = period
        self.window = window

    def _predict(self):
        return dow_ma_predict(self.y_, self.period, self.window)


class AutoRegressive(BaseForecaster):
    """AR(p) with intercept fitted by least squares."""

    def __init__(self, order=1):
        self.order = order

    def _fit(self, y):
        self.model_ = ar_fit(y, self.order)

    def _predict(self):
        return ar_predict(self.model_, self.y_[-self.order :])


class QuantileAutoRegressive(BaseForecaster):
    """Linear tau-quantile autoregression fitted by IRLS."""

    quantile = True

    def __init__(self, order=1, tau=0.5, epsilon=1e-6, max_iter=100, tol=1e-8):
        self.order = order
        self.tau = tau
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.tol = tol

    def _fit(self, y):
        self.model_ = qar_fit_irls(y, self.order, self.tau, self.epsilon, self.max_iter, self.tol)

    def _predict(self):
        return ar_predict(self.model_, self.y_[-self.order :])


class HoltWinters(BaseForecaster):
    """Additive Holt-Winters; smoothing parameters picked on a lattice by in-sample MSE."""

    def __init__(self, season_length=7, grid_step=0.1):
        self.season_length = season_length
        self.grid_step = grid_step

    def _fit(self, y):
        self.model_ = holt_winters_fit(y, self.season_length, self.grid_step)

    def _predict(self):
        return hw_predict(self.model_)


METHODS: Dict[str, type] = {
    "QuantileExpertMixture": QuantileExpertMixture,
    "MeanExpertMixture": MeanExpertMixture,
    "QAR": QuantileAutoRegressive,
    "AR": AutoRegressive,
    "MA": MovingAverage,
    "DayOfTheWeekMA": DayOfTheWeekMA,
    "HoltWinters": HoltWinters,
}


def make_forecaster(name: str, **config) -> BaseForecaster:
    """Build a forecaster by method name, ignoring options it does not take."""
    try:
        cls = METHODS[name]
    except KeyError:
        raise UsageError(f"unknown method {name!r}; choose from {', '.join(METHODS)}") from None
    est = cls()
    params = est.get_params()
    return est.set_params(**{k: v for k, v in config.items() if k in params and v is not None})
