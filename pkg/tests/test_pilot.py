"""Pilot density, derivative and curvature estimates"""

import logging

import numpy as np
import pytest

from src.core.exceptions import InsufficientData, ZeroFourthDerivative
from src.core.kernels import KernelKind, kernel_constants
from src.core.lpr import RegressionSample, Side
from src.core.pilot import (
    MIN_PILOT_WINDOW,
    PILOT_CONSTANTS,
    PilotEstimator,
    _widen_to_minimum,
    curvature_and_variance,
    density_at_cutoff,
    density_derivative_at_cutoff,
    pilot_bandwidth,
    quartic_pilot,
    second_order_bias_coeff,
)
from src.simulation.designs import get_design, sample_design


def test_pilot_constants():
    assert PILOT_CONSTANTS == {2: 5.2088, 3: 4.8227}


def test_pilot_bandwidth_rate():
    # h ~ n^(-1/9), so 512 times the data halves the bandwidth
    small = pilot_bandwidth(2, 0.02, 0.6, -500.0, 1000)
    large = pilot_bandwidth(2, 0.02, 0.6, -500.0, 512 * 1000)
    assert small / large == pytest.approx(2.0, rel=1e-12)
    h3 = pilot_bandwidth(3, 0.02, 0.6, -500.0, 1000)
    assert h3 / small == pytest.approx(4.8227 / 5.2088, rel=1e-12)


def test_pilot_bandwidth_rejects_zero_fourth_derivative():
    with pytest.raises(ZeroFourthDerivative):
        pilot_bandwidth(2, 0.02, 0.6, 0.0, 1000)


def test_pilot_bandwidth_cap(caplog):
    with caplog.at_level(logging.WARNING):
        h = pilot_bandwidth(2, 10.0, 0.6, 1e-3, 50, max_bandwidth=0.8)
    assert h == 0.8
    assert "capped" in caplog.text


def test_pilot_bandwidth_unknown_order():
    with pytest.raises(ValueError):
        pilot_bandwidth(1, 0.02, 0.6, 1.0, 100)


def test_quartic_pilot_exact_quartic():
    x = np.linspace(-1, 1, 201)
    y = 1.0 + x + 2.0 * x ** 4
    m4, s2 = quartic_pilot(RegressionSample(x, y), Side.RIGHT)
    assert m4 == pytest.approx(48.0, rel=1e-8)
    assert s2 == pytest.approx(0.0, abs=1e-20)


def test_quartic_pilot_needs_six_points():
    sample = RegressionSample(x=[-0.5, -0.4, 0.1, 0.2, 0.3, 0.4, 0.5], y=np.zeros(7))
    with pytest.raises(InsufficientData):
        quartic_pilot(sample, Side.LEFT)


def test_curvature_and_variance_exact_cubic():
    x = np.linspace(-1, 1, 401)
    y = np.where(x >= 0, 1.0 + 2.0 * x + 3.0 * x ** 2 + 4.0 * x ** 3, 0.0)
    m2, m3, sigma2 = curvature_and_variance(RegressionSample(x, y), Side.RIGHT, 0.5, 0.6)
    assert m2 == pytest.approx(6.0, abs=1e-7)
    assert m3 == pytest.approx(24.0, abs=1e-6)
    assert sigma2 == pytest.approx(0.0, abs=1e-20)


def test_window_widened_to_minimum(caplog):
    x = np.concatenate([-np.arange(1, 11) / 10, np.arange(1, 11) / 10])
    sample = RegressionSample(x, np.zeros_like(x))
    with caplog.at_level(logging.WARNING):
        h = _widen_to_minimum(sample, Side.RIGHT, 0.05)
    assert h == pytest.approx(0.5, rel=1e-8)
    xs, _ = sample.side_data(Side.RIGHT)
    assert np.count_nonzero(np.abs(xs) < h) == MIN_PILOT_WINDOW
    assert "widened" in caplog.text
    assert _widen_to_minimum(sample, Side.RIGHT, 0.75) == 0.75


def test_second_order_bias_sign_flips_by_side():
    k = kernel_constants(KernelKind.TRIANGULAR)
    right = second_order_bias_coeff(Side.RIGHT, -6.0, 47.94, 0.625, -1.25, k)
    left = second_order_bias_coeff(Side.LEFT, -6.0, 47.94, 0.625, -1.25, k)
    assert right == pytest.approx(-0.919, abs=1e-12)
    assert left == pytest.approx(-right)


def test_second_order_bias_without_density_slope():
    k = kernel_constants(KernelKind.TRIANGULAR)
    assert second_order_bias_coeff(Side.RIGHT, 5.0, 12.0, 0.7, 0.0, k) == pytest.approx(k.xi1 * 2.0)
    assert second_order_bias_coeff(Side.RIGHT, 5.0, 0.0, 0.7, 0.0, k) == 0.0


def test_density_derivative_is_odd_under_reflection():
    rng = np.random.default_rng(5)
    x = rng.normal(0.2, 1.0, size=3000)
    assert density_derivative_at_cutoff(-x, -0.1) == pytest.approx(-density_derivative_at_cutoff(x, 0.1), rel=1e-12)
    assert density_at_cutoff(-x, -0.1) == pytest.approx(density_at_cutoff(x, 0.1), rel=1e-12)


def test_density_at_cutoff_design_law():
    sample = sample_design(get_design(1), 200_000, seed=3)
    assert density_at_cutoff(sample.x, 0.0) == pytest.approx(0.625, abs=0.02)


def test_pilot_estimator_on_design_sample(design1_sample):
    pilots = PilotEstimator().estimate(design1_sample)
    assert pilots.n == design1_sample.n
    assert pilots.f_c == pytest.approx(0.625, abs=0.1)
    assert pilots.sigma2.right > 0 and pilots.sigma2.left > 0
    assert pilots.pilot_h2.right > 0 and pilots.pilot_h3.left > 0
    data = pilots.to_dict()
    assert data["kernel"] == "triangular"
    assert len(data["m2"]) == 2


def test_pilot_errors_carry_stage_and_side():
    rng = np.random.default_rng(0)
    x = np.concatenate([rng.uniform(0, 1, 50), [-0.3, -0.2, -0.1]])
    sample = RegressionSample(x, x + rng.normal(0, 0.1, x.size))
    with pytest.raises(InsufficientData) as info:
        PilotEstimator().estimate(sample)
    assert info.value.stage == "pilot step 2"
    assert info.value.side == "left"


@pytest.mark.slow
def test_density_derivative_large_sample():
    sample = sample_design(get_design(1), 1_000_000, seed=2024)
    # sampling SD of the derivative estimate is about 0.035 at this n
    assert density_derivative_at_cutoff(sample.x, 0.0) == pytest.approx(-1.25, abs=0.15)


def test_cubic_pilots_on_noisy_cubic():
    rng = np.random.default_rng(8)
    x = rng.uniform(-1, 1, 200_000)
    y = np.where(x >= 0, 1.0 - 3.0 * x ** 2 + 8.0 * x ** 3, 0.5 * x) + rng.normal(0, 0.1, x.size)
    m2, m3, sigma2 = curvature_and_variance(RegressionSample(x, y), Side.RIGHT, 0.8, 0.8)
    assert m2 == pytest.approx(-6.0, abs=0.5)
    assert m3 == pytest.approx(48.0, abs=4.0)
    assert sigma2 == pytest.approx(0.01, rel=0.05)


def _assert_pilots_close(a, b, rel=1e-8):
    assert a.f_c == pytest.approx(b.f_c, rel=rel)
    assert a.f1_c == pytest.approx(b.f1_c, rel=rel)
    for name in ("m2", "m3", "sigma2", "b2", "pilot_h2", "pilot_h3"):
        assert tuple(getattr(a, name)) == pytest.approx(tuple(getattr(b, name)), rel=rel), name
    assert tuple(a.n_side) == tuple(b.n_side)


def test_pilots_ignore_observation_order(design1_sample):
    order = np.random.default_rng(9).permutation(design1_sample.n)
    shuffled = RegressionSample(design1_sample.x[order], design1_sample.y[order], design1_sample.c)
    _assert_pilots_close(PilotEstimator().estimate(shuffled), PilotEstimator().estimate(design1_sample))


def test_pilots_under_outcome_scaling(design1_sample):
    a = 3.0
    base = PilotEstimator().estimate(design1_sample)
    scaled = PilotEstimator().estimate(RegressionSample(design1_sample.x, a * design1_sample.y, design1_sample.c))
    # curvature pilots scale with y, variance with y squared, windows not at all
    assert tuple(scaled.m2) == pytest.approx(tuple(a * v for v in base.m2), rel=1e-8)
    assert tuple(scaled.b2) == pytest.approx(tuple(a * v for v in base.b2), rel=1e-8)
    assert tuple(scaled.sigma2) == pytest.approx(tuple(a ** 2 * v for v in base.sigma2), rel=1e-8)
    assert tuple(scaled.pilot_h2) == pytest.approx(tuple(base.pilot_h2), rel=1e-8)
    assert scaled.f_c == base.f_c
