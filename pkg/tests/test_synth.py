import math

import numpy as np
import pytest

from nnquantile.exceptions import UnsupportedSpec, UsageError
from nnquantile.metrics import pinball_metric
from nnquantile.synth import (
    ProcessSpec,
    generate,
    gaussian_tau_quantile,
    lstar_oracle,
    normal_cdf,
    true_conditional_quantile_path,
    uniforms,
)


def test_generate_deterministic():
    spec = ProcessSpec("iid_gaussian", 10, seed=42)
    assert generate(spec).values.tobytes() == generate(spec).values.tobytes()
    assert generate(spec) != generate(ProcessSpec("iid_gaussian", 10, seed=43))


def test_uniforms_open_interval():
    u = uniforms(0, 100_000)
    assert u.min() > 0 and u.max() < 1


def test_ar1_phi_zero_mean():
    y = generate(ProcessSpec("ar1", 50_000, seed=6, phi=0.0)).values
    assert abs(y.mean()) < 0.02


def test_seasonal_zero_noise_is_periodic():
    amps = (1.0, -2.0, 0.5, 0.0, 3.0, 1.0, -1.0)
    y = generate(ProcessSpec("seasonal", 70, seed=1, mu=5.0, sigma=0.0, amplitudes=amps)).values
    assert np.array_equal(y[7:], y[:-7])
    assert y[:7].tolist() == [5.0 + a for a in amps]


def test_spec_validation():
    with pytest.raises(UsageError):
        ProcessSpec("ar1", 10, phi=1.0)
    with pytest.raises(UsageError):
        ProcessSpec("walk", 10)
    with pytest.raises(UsageError):
        ProcessSpec("seasonal", 10, amplitudes=(1.0, 2.0))


def test_gaussian_quantile_examples():
    assert gaussian_tau_quantile(0.5) == pytest.approx(0.0, abs=1e-15)
    assert gaussian_tau_quantile(0.5, 3, 5) == pytest.approx(3.0, abs=1e-14)
    for tau in (0.01, 0.1, 0.25, 0.9, 0.999):
        assert abs(normal_cdf(gaussian_tau_quantile(tau)) - tau) < 1e-12
    assert gaussian_tau_quantile(0.9) == pytest.approx(1.2815515655446004, abs=1e-12)


def test_lstar_closed_form():
    spec = ProcessSpec("iid_gaussian", 1)
    assert abs(lstar_oracle(spec, 0.5) - 0.5 * math.sqrt(2 / math.pi)) < 1e-9
    for tau in (0.1, 0.3, 0.9):
        z = gaussian_tau_quantile(tau)
        closed = math.exp(-z * z / 2) / math.sqrt(2 * math.pi)
        assert abs(lstar_oracle(spec, tau) - closed) < 1e-9


def test_lstar_scale_and_ar1():
    base = lstar_oracle(ProcessSpec("iid_gaussian", 1), 0.7)
    assert abs(lstar_oracle(ProcessSpec("iid_gaussian", 1, sigma=2.5), 0.7) - 2.5 * base) < 1e-9
    assert lstar_oracle(ProcessSpec("ar1", 1, phi=0.6), 0.7) == pytest.approx(base, abs=1e-12)
    with pytest.raises(UnsupportedSpec):
        lstar_oracle(ProcessSpec("seasonal", 7), 0.5)


def test_conditional_path_examples():
    spec = ProcessSpec("ar1", 5, phi=0.0)
    assert np.allclose(true_conditional_quantile_path(spec, [1, 2, 3, 4, 5], 0.5), 0, atol=1e-15)
    spec = ProcessSpec("ar1", 2, phi=0.6)
    assert true_conditional_quantile_path(spec, [2.0, 0.0], 0.5)[1] == pytest.approx(1.2)
    spec = ProcessSpec("ar1", 2, phi=0.6, sigma=2.0)
    assert true_conditional_quantile_path(spec, [0.0, 0.0], 0.9)[1] == 2 * gaussian_tau_quantile(0.9)
    with pytest.raises(UnsupportedSpec):
        true_conditional_quantile_path(ProcessSpec("iid_gaussian", 2), [0, 0], 0.5)


@pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
def test_empirical_quantile_of_many_draws(tau):
    y = generate(ProcessSpec("iid_gaussian", 1_000_000, seed=77)).values
    assert abs(np.quantile(y, tau, method="inverted_cdf") - gaussian_tau_quantile(tau)) < 0.01


@pytest.mark.parametrize("tau", [0.1, 0.5, 0.9])
def test_true_path_loss_converges_to_lstar(tau):
    spec = ProcessSpec("ar1", 50_000, seed=12, phi=0.6)
    y = generate(spec).values
    path = true_conditional_quantile_path(spec, y, tau)
    assert abs(pinball_metric(path, y, tau) / lstar_oracle(spec, tau) - 1) < 0.02
