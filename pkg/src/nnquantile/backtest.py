"""Train-on-prefix / predict-next backtesting over a set of dates."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
from sklearn.base import clone

from .exceptions import DataError, EmptyInput
from .estimators import BaseForecaster
from .metrics import MetricsReport, metrics_report
from .types import QuantileLevel, Series, validate_series

__all__ = ["BacktestPlan", "PointRecord", "BacktestResult", "backtest", "sweep_orders"]


@dataclass(frozen=True)
class BacktestPlan:
    """Series to score, prefix lengths ``m`` (fit on ``y_1^m``, score ``y_{m+1}``) and tau.

    ``dates`` is either one list shared by every series or a mapping from
    series id to its own list.
    """

    series: Mapping[str, Series]
    dates: Union[Sequence[int], Mapping[str, Sequence[int]]]
    tau: QuantileLevel = field(default_factory=lambda: QuantileLevel.of(0.5))

    def __post_init__(self):
        ser = {str(k): validate_series(v) for k, v in self.series.items()}
        if not ser:
            raise EmptyInput("backtest plan has no series")
        if isinstance(self.dates, Mapping):
            dates = {str(k): tuple(int(m) for m in v) for k, v in self.dates.items()}
            missing = set(ser) - set(dates)
            if missing:
                raise DataError(f"no dates for series {sorted(missing)}")
        else:
            common = tuple(int(m) for m in self.dates)
            dates = {k: common for k in ser}
        for sid, ds in dates.items():
            if sid not in ser:
                continue
            if any(b <= a for a, b in zip(ds, ds[1:])):
                raise DataError(f"dates for series {sid!r} are not strictly increasing")
            if ds and (ds[0] < 1 or ds[-1] + 1 > len(ser[sid])):
                raise DataError(f"dates for series {sid!r} must satisfy 1 <= m < {len(ser[sid])}")
        object.__setattr__(self, "series", ser)
        object.__setattr__(self, "dates", {k: dates[k] for k in ser})
        object.__setattr__(self, "tau", QuantileLevel.of(self.tau))

    def cells(self):
        for sid, ser in self.series.items():
            for m in self.dates[sid]:
                yield sid, m


@dataclass(frozen=True)
class PointRecord:
    series_id: str
    date: int
    prediction: Optional[float]
    observed: float
    error: Optional[str] = None


@dataclass
class BacktestResult:
    method: str
    report: Optional[MetricsReport]
    records: List[PointRecord]
    params: Dict = field(default_factory=dict)

    @property
    def excluded(self) -> int:
        return sum(r.error is not None for r in self.records)


def _with_tau(forecaster: BaseForecaster, tau: QuantileLevel) -> BaseForecaster:
    est = clone(forecaster)
    if "tau" in est.get_params():
        est.set_params(tau=tau.value)
    return est


def backtest(plan: BacktestPlan, forecaster: BaseForecaster) -> BacktestResult:
    """Score ``forecaster`` on every ``(series, m)`` cell of ``plan``.

    Cells whose fit fails (e.g. a rank-deficient AR design) are kept in the
    records with their error message and left out of the metrics.
    """
    est = _with_tau(forecaster, plan.tau)
    records = []
    for sid, ser in plan.series.items():
        ds = plan.dates[sid]
        preds = est.forecast_at(ser.values, ds)
        for m, p in zip(ds, preds):
            obs = float(ser.values[m])
            if isinstance(p, Exception):
                records.append(PointRecord(sid, m, None, obs, f"{type(p).__name__}: {p}"))
            else:
                records.append(PointRecord(sid, m, float(p), obs))
    ok = [r for r in records if r.error is None]
    report = None
    if ok:
        report = metrics_report(
            [r.prediction for r in ok],
            [r.observed for r in ok],
            plan.tau,
            excluded_points=len(records) - len(ok),
        )
    return BacktestResult(type(forecaster).__name__, report, records, est.get_params())


def sweep_orders(plan: BacktestPlan, forecaster: BaseForecaster, orders: Sequence[int], criterion=None):
    """Backtest every ``order`` and return ``(results, best_order)``.

    ``criterion`` is a :class:`MetricsReport` field; defaults to ``pinball``
    for quantile methods and ``avg_sqr`` otherwise. Ties go to the smaller
    order.
    """
    if criterion is None:
        criterion = "pinball" if forecaster.quantile else "avg_sqr"
    results = {}
    for p in orders:
        results[p] = backtest(plan, clone(forecaster).set_params(order=p))
    scored = [(getattr(r.report, criterion), p) for p, r in results.items() if r.report is not None]
    best = min(scored)[1] if scored else None
    return results, best
