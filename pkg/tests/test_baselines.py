import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nnquantile.baselines import (
    HoltWintersModel,
    LinearModel,
    _lag_design,
    ar_fit,
    ar_predict,
    dow_ma_predict,
    holt_winters_fit,
    hw_predict,
    ma_predict,
    mem_run,
    qar_fit_irls,
    qar_objective,
)
from nnquantile.estimators import (
    AutoRegressive,
    DayOfTheWeekMA,
    HoltWinters,
    MovingAverage,
    QuantileAutoRegressive,
)
from nnquantile.exceptions import (
    NoSameWeekdayHistory,
    RankDeficient,
    SeriesTooShort,
    WrongLagCount,
)
from nnquantile.pinball import pinball_loss
from nnquantile.synth import ProcessSpec, generate
from nnquantile.types import uniform_grid
from nnquantile.verification.reference import reference_mixture

finite = st.floats(-1e6, 1e6, allow_nan=False)


@pytest.mark.parametrize("prefix, w, expected", [([2, 4], 2, 3), ([5], 10, 5), ([1, 2, 3, 4], 2, 3.5)])
def test_ma_examples(prefix, w, expected):
    assert ma_predict(prefix, w) == expected


def test_dow_examples():
    assert dow_ma_predict([1, 9, 9, 9, 9, 9, 9], 7) == 1
    assert dow_ma_predict([1, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0], 7) == 2
    assert dow_ma_predict([5, 5, 5], 1) == 5
    assert dow_ma_predict([1, 0, 0, 0, 0, 0, 0, 3, 0, 0, 0, 0, 0, 0], 7, window=1) == 3


def test_dow_needs_history():
    with pytest.raises(NoSameWeekdayHistory):
        dow_ma_predict([1, 2, 3], 7)


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=40), st.integers(1, 50))
def test_dow_period_one_is_ma(y, w):
    assert dow_ma_predict(y, 1, w) == pytest.approx(ma_predict(y, w), rel=1e-12, abs=1e-9)


def test_ar_fit_noiseless():
    y = 0.5 ** np.arange(20)
    m = ar_fit(y, 1)
    assert m.intercept == pytest.approx(0.0, abs=1e-8)
    assert m.coefficients[0] == pytest.approx(0.5, abs=1e-8)


def test_ar_fit_constant_series():
    try:
        m = ar_fit(np.full(30, 4.0), 1)
    except RankDeficient:
        return
    assert m.intercept + 4.0 * m.coefficients[0] == pytest.approx(4.0)


def test_ar_fit_too_short():
    with pytest.raises(SeriesTooShort):
        ar_fit([1.0, 2.0], 1)


def test_ar2_monte_carlo():
    eps = generate(ProcessSpec("iid_gaussian", 5000, seed=202)).values
    y = np.zeros(5000)
    for t in range(2, 5000):
        y[t] = 0.5 * y[t - 1] - 0.3 * y[t - 2] + eps[t]
    m = ar_fit(y, 2)
    assert abs(m.coefficients[0] - 0.5) < 0.05
    assert abs(m.coefficients[1] + 0.3) < 0.05


def test_ar_residuals_orthogonal(rng):
    y = rng.normal(size=300).cumsum()
    y = (y - y.mean()) / y.std()
    m = ar_fit(y, 3)
    X, target = _lag_design(y, 3)
    r = target - X @ np.r_[m.intercept, m.coefficients]
    assert np.all(np.abs(X.T @ r) < 1e-6 * y.shape[0])


def test_ar_predict_examples():
    assert ar_predict(LinearModel(0.0, (0.5,)), [4]) == 2
    assert ar_predict(LinearModel(1.0, (0.0, 0.0)), [9, 9]) == 1
    # last values oldest first: y_{n-2}=1, y_{n-1}=2
    assert ar_predict(LinearModel(0.5, (0.3, 0.2)), [1, 2]) == pytest.approx(0.5 + 0.2 * 1 + 0.3 * 2)
    with pytest.raises(WrongLagCount):
        ar_predict(LinearModel(0.0, (0.5,)), [1, 2])


@pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
def test_qar_noiseless(tau):
    y = np.empty(40)
    y[0] = 3.0
    for t in range(1, 40):
        y[t] = 1.0 + 0.5 * y[t - 1]
    m = qar_fit_irls(y, 1, tau)
    assert m.intercept == pytest.approx(1.0, abs=1e-6)
    assert m.coefficients[0] == pytest.approx(0.5, abs=1e-6)


def test_qar_never_worse_than_ols(rng):
    for seed in range(20):
        r = np.random.default_rng(seed)
        y = r.standard_t(2, size=120).cumsum() * 0.1
        for tau in (0.1, 0.5, 0.9):
            m = qar_fit_irls(y, 2, tau)
            assert qar_objective(y, m, tau) <= qar_objective(y, ar_fit(y, 2), tau) + 1e-12


def test_qar_grid_oracle_small():
    eps = generate(ProcessSpec("iid_gaussian", 60, seed=5)).values
    y = np.empty(60)
    y[0] = 2.0
    for t in range(1, 60):
        y[t] = 1.0 + 0.5 * y[t - 1] + eps[t]
    m = qar_fit_irls(y, 1, 0.5)
    X, target = _lag_design(y, 1)
    ols = ar_fit(y, 1)
    b0 = np.linspace(ols.intercept - 2, ols.intercept + 2, 200)
    b1 = np.linspace(ols.coefficients[0] - 0.5, ols.coefficients[0] + 0.5, 200)
    best = min(np.sum(pinball_loss(target[None] - b0[:, None] - s * X[None, :, 1], 0.5), axis=1).min() for s in b1)
    assert qar_objective(y, m, 0.5) <= best * (1 + 1e-3)


def test_qar_median_agrees_with_ols_slope():
    eps = generate(ProcessSpec("iid_gaussian", 4000, seed=31)).values
    y = np.zeros(4000)
    for t in range(1, 4000):
        y[t] = 0.6 * y[t - 1] + eps[t]
    assert abs(qar_fit_irls(y, 1, 0.5).coefficients[0] - ar_fit(y, 1).coefficients[0]) < 0.05


def test_hw_constant():
    m = holt_winters_fit(np.full(30, 6.0), 7)
    assert m.mse == 0.0
    assert hw_predict(m) == 6.0


def test_hw_exact_seasonal():
    pattern = np.array([3.0, -1.0, 0.5, 2.0, -4.0, 1.0, -1.5])
    y = 10.0 + np.tile(pattern, 10)
    m = holt_winters_fit(y, 7)
    assert m.mse < 1e-16
    assert hw_predict(m) == pytest.approx(y[0], abs=1e-8)


def test_hw_linear_trend():
    y = 2.0 * np.arange(1, 71)
    m = holt_winters_fit(y, 7)
    assert abs(hw_predict(m) - 142.0) < 1e-6


def test_hw_predict_examples():
    assert hw_predict(HoltWintersModel(0, 0, 0, 7, 10.0, 0.0, (0.0,) * 7, 7)) == 10
    seas = (0.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    assert hw_predict(HoltWintersModel(0, 0, 0, 7, 10.0, 1.0, seas, 8)) == 9


def test_hw_too_short():
    with pytest.raises(SeriesTooShort):
        holt_winters_fit(np.ones(13), 7)


def test_hw_parameters_on_lattice(rng):
    m = holt_winters_fit(rng.normal(size=50) + np.tile(np.arange(7.0), 8)[:50], 7)
    for v in (m.alpha, m.beta, m.gamma):
        assert 0 <= v <= 1 and abs(v * 10 - round(v * 10)) < 1e-12
    assert len(m.seasonals) == 7


def test_mem_constant_series():
    res = mem_run(np.full(40, 2.0), uniform_grid(2, 3))
    assert np.allclose(res.aggregate_predictions[6:], 2.0, atol=1e-12)


def test_mem_matches_reference():
    y = np.random.default_rng(11).uniform(size=200)
    res = mem_run(y, uniform_grid(2, 3))
    ref_f, ref_l = reference_mixture(y, 2, 3, mean_experts=True)
    assert np.max(np.abs(res.aggregate_predictions - ref_f)) <= 1e-10
    assert abs(res.aggregate_loss - ref_l) <= 1e-10


def test_mem_uses_squared_loss():
    res = mem_run([1.0, 3.0], uniform_grid(1, 1), keep_records=False)
    assert res.state.raw_loss.tolist() == [10.0]


@pytest.mark.parametrize(
    "est",
    [
        MovingAverage(5),
        DayOfTheWeekMA(),
        AutoRegressive(2),
        QuantileAutoRegressive(2, tau=0.7),
        HoltWinters(),
    ],
    ids=lambda e: type(e).__name__,
)
def test_baselines_causal(est, rng):
    y = rng.normal(size=60)
    z = y.copy()
    z[41:] = rng.normal(size=19) * 1e3
    dates = [20, 30, 41]
    assert est.forecast_at(y, dates) == est.forecast_at(z, dates)
