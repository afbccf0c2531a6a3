"""Acceptance criteria, one test each; run with ``-s`` to see the result lines."""
import pytest

from nnquantile.verification import acceptance as acc


def _run(check):
    res = check()
    print("\n" + res.line())
    assert res.passed, res.line()


def test_1_table_layout_stand_in():
    _run(acc.check_report_layout)


def test_2_quantile_grid_oracle():
    _run(acc.check_quantile_oracle)


def test_3_pinball_properties():
    _run(acc.check_pinball_properties)


@pytest.mark.slow
def test_4_regret_inequality():
    _run(acc.check_regret_inequality)


@pytest.mark.slow
def test_5_consistency():
    _run(acc.check_consistency)


@pytest.mark.slow
def test_6_ramp_calibration():
    _run(acc.check_ramp)


@pytest.mark.slow
def test_7_qar_irls():
    _run(acc.check_qar)


def test_8_reference_loops():
    _run(acc.check_reference_loops)


@pytest.mark.slow
def test_9_backtest_determinism_and_speed():
    _run(acc.check_backtest)
