import math

import numpy as np
import pytest

from nnquantile.aggregator import (
    AggregatorState,
    compute_weights,
    predict,
    regret_bound,
    run_sequence,
    update,
)
from nnquantile.exceptions import PredictionMissing
from nnquantile.types import (
    EtaSchedule,
    ExpertGrid,
    ExpertKey,
    TruncationPolicy,
    fractional_grid,
    uniform_grid,
)
from nnquantile.verification.reference import reference_mixture


def test_weights_equal_losses_uniform():
    st = AggregatorState(uniform_grid(1, 2), 0.5)
    st.raw_loss = np.array([3.0, 3.0])
    assert compute_weights(st).tolist() == [0.5, 0.5]


def test_weights_step_one_equal_prior_exactly():
    grid = ExpertGrid((ExpertKey(1, 1), ExpertKey(1, 2), ExpertKey(2, 1)), [0.2, 0.3, 0.5])
    st = AggregatorState(grid, 0.5)
    assert np.array_equal(compute_weights(st), grid.prior)


def test_weights_shift_invariant(rng):
    st = AggregatorState(uniform_grid(3, 4), 0.5)
    st.step = 17
    st.raw_loss = rng.uniform(0, 50, size=12)
    w = compute_weights(st)
    st.raw_loss = st.raw_loss + 123.456
    assert np.allclose(compute_weights(st), w, rtol=0, atol=1e-12)


def test_weights_stable_for_huge_losses():
    st = AggregatorState(uniform_grid(1, 3), 0.5)
    st.raw_loss = np.array([1e6, 1e6 + 1, 1e9])
    w = compute_weights(st)
    assert np.all(np.isfinite(w)) and w.sum() == pytest.approx(1.0)
    assert w[0] == pytest.approx(1 / (1 + math.e**-1))


def test_weights_match_definition(rng):
    grid = uniform_grid(2, 3)
    st = AggregatorState(grid, 0.5)
    st.step = 9
    st.raw_loss = rng.uniform(0, 5, size=6)
    w = grid.prior * np.exp(-st.eta(9) * st.raw_loss)
    assert np.allclose(compute_weights(st), w / w.sum(), atol=1e-15)


def test_predict_convex_combination():
    st = AggregatorState(uniform_grid(1, 2), 0.5)
    st._bank.predict = lambda y, n: np.array([1.0, 3.0])
    assert predict(st, []).aggregate == 2.0


def test_single_expert_aggregate(rng):
    y = rng.normal(size=30)
    res = run_sequence(y, uniform_grid(1, 1), 0.5)
    for rec in res.records:
        assert rec.aggregate == rec.expert_predictions[0]


def test_constant_series_aggregate_is_constant_once_warm():
    y = np.full(60, 4.0)
    res = run_sequence(y, uniform_grid(3, 4), 0.5)
    # every expert is live once n > 3 + 4 + 1
    for rec in res.records[8:]:
        assert rec.aggregate == pytest.approx(4.0, abs=1e-12)


def test_update_examples():
    st = AggregatorState(uniform_grid(1, 2), 0.5)
    predict(st, [])
    st.last_prediction = np.array([5.0, 3.0])
    update(st, 5.0)
    assert st.raw_loss.tolist() == [0.0, 1.0]
    assert st.step == 2
    with pytest.raises(PredictionMissing):
        update(st, 1.0)


def test_raw_loss_nondecreasing(rng):
    st = AggregatorState(uniform_grid(2, 2), 0.8)
    y = rng.normal(size=25)
    prev = st.raw_loss.copy()
    for i in range(25):
        predict(st, y[:i])
        update(st, y[i])
        assert np.all(st.raw_loss >= prev)
        prev = st.raw_loss.copy()


def _hand_trace_constant(c, n, k_max, l_max, tau):
    """Experts predict 0 while degenerate and c afterwards; weights follow by hand."""
    keys = [(k, l) for k in range(1, k_max + 1) for l in range(1, l_max + 1)]
    rho0 = c * tau if c > 0 else c * (tau - 1)  # loss of predicting 0
    cum = [0.0] * len(keys)
    total = 0.0
    for t in range(1, n + 1):
        eta = math.sqrt(1 / t)
        h = [c if t > k + l + 1 else 0.0 for k, l in keys]
        w = [math.exp(-eta * L) for L in cum]
        g = sum(wi * hi for wi, hi in zip(w, h)) / sum(w)
        r = c - g
        total += r * tau if r > 0 else r * (tau - 1)
        cum = [L + (rho0 if hi == 0.0 else 0.0) for L, hi in zip(cum, h)]
    return total / n


@pytest.mark.parametrize("tau", [0.3, 0.5, 0.9])
def test_run_sequence_constant_hand_trace(tau):
    c = 5.0
    res = run_sequence(np.full(50, c), uniform_grid(2, 3), tau)
    assert res.aggregate_loss == pytest.approx(_hand_trace_constant(c, 50, 2, 3, tau), abs=1e-12)
    # only the warm-up contributes: the trailing losses vanish
    tail = res.aggregate_predictions[6:]
    assert np.allclose(tail, c, atol=1e-12)


def test_run_sequence_single_observation():
    res = run_sequence([2.5], uniform_grid(3, 3), 0.5)
    assert len(res.records) == 1
    assert np.all(res.records[0].expert_predictions == 0.0)
    assert res.aggregate_loss == pytest.approx(1.25)


def test_run_sequence_matches_reference_loop():
    y = np.random.default_rng(7).uniform(size=200)
    res = run_sequence(y, uniform_grid(2, 3), 0.5)
    ref_f, ref_l = reference_mixture(y, 2, 3, 0.5)
    assert np.max(np.abs(res.aggregate_predictions - ref_f)) <= 1e-10
    assert abs(res.aggregate_loss - ref_l) <= 1e-10


def test_weights_are_probabilities_and_aggregate_in_hull(rng):
    y = rng.standard_t(3, size=150)
    res = run_sequence(y, uniform_grid(3, 5), 0.2)
    for rec in res.records:
        assert abs(rec.weights.sum() - 1.0) <= 1e-9
        assert np.all(rec.weights >= 0) and np.all(rec.weights <= 1)
        lo, hi = rec.expert_predictions.min(), rec.expert_predictions.max()
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        assert lo - slack <= rec.aggregate <= hi + slack


def test_regret_inequality_holds(rng):
    for tau in (0.1, 0.5, 0.9):
        y = rng.normal(size=200).cumsum() * 0.1
        res = run_sequence(y, uniform_grid(3, 4), tau)
        assert res.aggregate_loss <= regret_bound(res) + 1e-9


def test_determinism(rng):
    y = rng.normal(size=120)
    a = run_sequence(y, uniform_grid(4, 5), 0.7)
    b = run_sequence(y, uniform_grid(4, 5), 0.7)
    assert a.aggregate_predictions.tobytes() == b.aggregate_predictions.tobytes()
    assert a.expert_losses.tobytes() == b.expert_losses.tobytes()


def test_engines_give_identical_trajectories(rng):
    y = np.round(rng.normal(size=200) * 3)  # integer data -> many ties
    a = run_sequence(y, uniform_grid(5, 8), 0.5, engine="naive", keep_records=False)
    b = run_sequence(y, uniform_grid(5, 8), 0.5, engine="incremental", keep_records=False)
    assert a.aggregate_predictions.tobytes() == b.aggregate_predictions.tobytes()


def test_truncation_clamps_expert_outputs():
    y = np.full(40, 50.0)
    res = run_sequence(y, uniform_grid(1, 3), 0.5, truncation=TruncationPolicy(True, 0.2))
    for rec in res.records:
        for key, p in zip(uniform_grid(1, 3).keys, rec.expert_predictions):
            assert abs(p) <= min(rec.step**0.2, key.lbar) + 1e-12


def test_fractional_mode_matches_fixed_count_experts(rng):
    y = rng.normal(size=80)
    grid = fractional_grid(2, [0.1, 0.05])
    st = AggregatorState(grid, 0.5, engine="naive")
    from nnquantile.knn import elementary_predict

    for i in range(80):
        rec = predict(st, y[:i])
        n = i + 1
        for key, p in zip(grid.keys, rec.expert_predictions):
            lbar = math.floor(grid.fractions[key.lbar - 1] * n)
            assert p == elementary_predict(y[:i], ExpertKey(key.k, 1), 0.5, lbar=lbar)
        update(st, y[i])


def test_constant_eta_schedule(rng):
    y = rng.normal(size=50)
    res = run_sequence(y, uniform_grid(2, 2), 0.5, eta=EtaSchedule("constant", 0.1))
    assert res.state.eta(10) == 0.1
    assert np.isfinite(res.aggregate_loss)
