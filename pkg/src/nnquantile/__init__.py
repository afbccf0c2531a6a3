"""Sequential quantile forecasting with nearest-neighbour experts."""

__version__ = "0.1.0"

from .aggregator import AggregatorState, compute_weights, predict, run_sequence, update
from .backtest import BacktestPlan, backtest
from .estimators import (
    AutoRegressive,
    DayOfTheWeekMA,
    HoltWinters,
    MeanExpertMixture,
    MovingAverage,
    QuantileAutoRegressive,
    QuantileExpertMixture,
    make_forecaster,
)
from .metrics import MetricsReport, error_metrics, pinball_metric, ramp_metric
from .pinball import empirical_quantile, pinball_loss, pinball_risk
from .types import (
    EtaSchedule,
    ExpertGrid,
    ExpertKey,
    QuantileLevel,
    Series,
    TruncationPolicy,
    uniform_grid,
    validate_series,
)
