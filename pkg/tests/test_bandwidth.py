"""Bandwidth selectors: closed forms against brute-force grids"""

import dataclasses

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.bandwidth import (
    BandwidthPair,
    BandwidthSelector,
    SearchConfig,
    Selector,
    TrueQuantities,
    afo_bandwidths,
    amse1,
    amse2,
    first_order_bias,
    ik_bandwidth,
    ind_bandwidths,
    mmse_objective,
    search_config_default,
    select_bandwidths,
    select_mmse,
)
from src.core.exceptions import BiasCancellation, DegenerateSample, ZeroSecondDerivative
from src.core.lpr import RegressionSample, SidePair

UNIT_SEARCH = SearchConfig(h1_bounds=(1e-4, 1.0), h0_bounds=(1e-4, 1.0))


def _quantities(m2, b2=(0.0, 0.0), sigma2=(0.0168, 0.0168), f_c=0.625, m3=(10.0, 10.0)):
    return TrueQuantities(
        f_c=f_c,
        f1_c=0.0,
        m2=SidePair(*m2),
        m3=SidePair(*m3),
        sigma2=SidePair(*sigma2),
        b2=SidePair(*b2),
        p1=0.5,
        p0=0.5,
    )


def _random_quantities(rng, sign):
    m1 = rng.uniform(0.5, 20.0) * rng.choice([-1, 1])
    m0 = sign * np.sign(m1) * rng.uniform(0.5, 20.0)
    return _quantities(
        m2=(m1, m0),
        b2=(rng.uniform(-5, 5), rng.uniform(-5, 5)),
        sigma2=(rng.uniform(0.005, 0.05), rng.uniform(0.005, 0.05)),
        f_c=rng.uniform(0.3, 1.5),
    )


def _grid_argmin(fn, center, spread=3.0, points=401):
    h1 = np.geomspace(center[0] / spread, center[0] * spread, points)
    h0 = np.geomspace(center[1] / spread, center[1] * spread, points)
    mesh1, mesh0 = np.meshgrid(h1, h0, indexing="ij")
    values = fn(mesh1, mesh0)
    idx = np.unravel_index(np.argmin(values), values.shape)
    return float(values[idx]), float(mesh1[idx]), float(mesh0[idx])


class TestAfo:

    @pytest.mark.parametrize("seed", range(100))
    def test_negative_case_matches_grid(self, seed, triangular):
        q = _random_quantities(np.random.default_rng(seed), sign=-1)
        n = 1000
        h = afo_bandwidths(q, triangular, n)
        assert h.diagnostics["case"] == "negative"

        best, g1, g0 = _grid_argmin(lambda a, b: amse1((a, b), q, triangular, n), (h.h1, h.h0))
        assert float(amse1((h.h1, h.h0), q, triangular, n)) <= best * (1 + 1e-12)
        assert g1 == pytest.approx(h.h1, rel=0.03)
        assert g0 == pytest.approx(h.h0, rel=0.03)

    @pytest.mark.parametrize("seed", range(100))
    def test_positive_case_minimizes_along_cancellation_line(self, seed, triangular):
        q = _random_quantities(np.random.default_rng(100 + seed), sign=1)
        n = 1000
        h = afo_bandwidths(q, triangular, n)
        lam = h.diagnostics["lambda"]
        assert h.diagnostics["case"] == "positive"
        scale = abs(q.m2.right) * h.h1 ** 2
        assert abs(first_order_bias(h.h1, h.h0, q, triangular)) <= 1e-12 * scale

        grid = np.geomspace(h.h1 / 3, h.h1 * 3, 4001)
        along = amse2((grid, lam * grid), q, triangular, n)
        assert float(amse2((h.h1, h.h0), q, triangular, n)) <= along.min() * (1 + 1e-12)
        assert grid[np.argmin(along)] == pytest.approx(h.h1, rel=0.002)

    def test_positive_case_rate(self, triangular):
        q = _quantities(m2=(-85.12, -26.28), b2=(-13.7924, -2.5634))
        first = afo_bandwidths(q, triangular, 1e4)
        second = afo_bandwidths(q, triangular, 1e4 * 2 ** 7)
        assert first.h1 / second.h1 == pytest.approx(2.0, rel=1e-12)
        assert first.diagnostics["lambda"] == pytest.approx(np.sqrt(85.12 / 26.28))

    def test_symmetric_inputs_give_equal_bandwidths(self, triangular):
        h = afo_bandwidths(_quantities(m2=(-6.0, 6.0)), triangular, 500)
        assert h.diagnostics["lambda"] == pytest.approx(1.0)
        assert h.h1 == pytest.approx(h.h0)

    def test_zero_second_derivative(self, triangular):
        with pytest.raises(ZeroSecondDerivative):
            afo_bandwidths(_quantities(m2=(0.0, 3.0)), triangular, 500)

    def test_vanishing_gap(self, triangular):
        # lambda = 2, so b21 = 8 * b20 cancels the second-order term too
        q = _quantities(m2=(4.0, 1.0), b2=(8.0, 1.0))
        with pytest.raises(BiasCancellation):
            afo_bandwidths(q, triangular, 500)

    def test_zero_variance_is_degenerate(self, triangular):
        with pytest.raises(DegenerateSample):
            afo_bandwidths(_quantities(m2=(-1.0, 1.0), sigma2=(0.0, 0.01)), triangular, 500)


class TestInd:

    @pytest.mark.parametrize("seed", range(5))
    def test_each_side_minimizes_its_own_amse(self, seed, triangular):
        q = _random_quantities(np.random.default_rng(200 + seed), sign=-1)
        n = 2000
        h = ind_bandwidths(q, triangular, n)
        for value, m2, s2 in ((h.h1, q.m2.right, q.sigma2.right), (h.h0, q.m2.left, q.sigma2.left)):
            grid = np.geomspace(value / 3, value * 3, 4001)
            side_amse = (0.5 * triangular.b1 * m2 * grid ** 2) ** 2 + triangular.v * s2 / (n * grid * q.f_c)
            assert grid[np.argmin(side_amse)] == pytest.approx(value, rel=0.002)

    def test_zero_curvature_side(self, triangular):
        with pytest.raises(ZeroSecondDerivative) as info:
            ind_bandwidths(_quantities(m2=(2.0, 0.0)), triangular, 500)
        assert info.value.side == "left"


class TestIk:

    def test_design3_population_bandwidth(self, truth, triangular):
        h = ik_bandwidth(truth(3), triangular, 5000)
        assert h.h1 == h.h0
        assert h.h1 == pytest.approx(0.173, rel=0.03)
        assert h.diagnostics["r_plus"] > 0 and h.diagnostics["r_minus"] > 0

    def test_regularization_keeps_bandwidth_finite(self, triangular):
        q = _quantities(m2=(-6.0, -6.0))
        h = ik_bandwidth(q, triangular, 1000)
        assert np.isfinite(h.h1)

    def test_sample_counts(self, design1_sample, triangular):
        q = _quantities(m2=(-6.0, 14.36), m3=(47.94, 121.26))
        h = ik_bandwidth(q, triangular, design1_sample.n, sample=design1_sample)
        assert h.h1 > 0
        assert 0 < h.diagnostics["h2_plus"] < np.inf
        assert 0 < h.diagnostics["h2_minus"] < np.inf


class TestMmse:

    @pytest.mark.parametrize("design_id", [1, 2, 4])
    def test_beats_verification_grid(self, design_id, truth, triangular):
        q = truth(design_id)
        h = select_mmse(q, triangular, 500, UNIT_SEARCH)
        grid = np.geomspace(1e-4, 1.0, 100)
        mesh1, mesh0 = np.meshgrid(grid, grid, indexing="ij")
        best = float(np.min(mmse_objective((mesh1, mesh0), q, triangular, 500)))
        assert float(mmse_objective((h.h1, h.h0), q, triangular, 500)) <= best * (1 + 1e-9)
        assert h.diagnostics["converged"] > 0

    def test_symmetric_inputs(self, triangular):
        q = _quantities(m2=(-6.0, 6.0), b2=(0.5, -0.5))
        h = select_mmse(q, triangular, 500, UNIT_SEARCH)
        assert h.h1 == pytest.approx(h.h0, rel=1e-4)

    @pytest.mark.parametrize("design_id", [1, 4])
    def test_converges_to_afo(self, design_id, truth, triangular):
        q, n, tolerance = truth(design_id), 1e9, 0.02
        h = select_mmse(q, triangular, n, UNIT_SEARCH)
        afo = afo_bandwidths(q, triangular, n)
        assert h.h1 / afo.h1 == pytest.approx(1.0, abs=tolerance)
        assert h.h0 / afo.h0 == pytest.approx(1.0, abs=tolerance)

    def test_outcome_scaling_leaves_bandwidths_unchanged(self, truth, triangular):
        q = truth(4)
        s = 7.0
        scaled = dataclasses.replace(
            q,
            m2=SidePair(*(s * v for v in q.m2)),
            m3=SidePair(*(s * v for v in q.m3)),
            b2=SidePair(*(s * v for v in q.b2)),
            sigma2=SidePair(*(s ** 2 * v for v in q.sigma2)),
        )
        base = select_mmse(q, triangular, 2000, UNIT_SEARCH)
        other = select_mmse(scaled, triangular, 2000, UNIT_SEARCH)
        assert other.h1 == pytest.approx(base.h1, rel=1e-5)
        assert other.h0 == pytest.approx(base.h0, rel=1e-5)
        assert afo_bandwidths(scaled, triangular, 2000).h1 == pytest.approx(afo_bandwidths(q, triangular, 2000).h1)

    def test_start_grid(self):
        grid1, grid0 = BandwidthSelector(UNIT_SEARCH).start_grid()
        assert grid1.size == grid0.size == 8
        assert grid1[0] == pytest.approx(1e-4) and grid1[-1] == pytest.approx(1.0)


class TestSearchConfig:

    def test_bounds_validated(self):
        with pytest.raises(ValidationError):
            SearchConfig(h1_bounds=(0.5, 0.1), h0_bounds=(0.1, 0.5))
        with pytest.raises(ValidationError):
            SearchConfig(h1_bounds=(0.0, 0.1), h0_bounds=(0.1, 0.5))

    def test_default_from_ranges(self):
        config = search_config_default(SidePair(2.0, 0.5))
        assert config.h1_bounds == pytest.approx((2e-4, 2.0))
        assert config.h0_bounds == pytest.approx((5e-5, 0.5))

    def test_default_from_sample(self):
        x = np.array([-0.4, -0.3, -0.2, -0.1, -0.05, 0.1, 0.2, 0.3, 0.4, 0.8])
        config = search_config_default(RegressionSample(x, np.zeros_like(x)))
        assert config.h1_bounds[0] == pytest.approx(0.4, rel=1e-8)
        assert config.h1_bounds[1] == pytest.approx(0.8)
        assert config.h0_bounds[0] == pytest.approx(0.3, rel=1e-8)


def test_bandwidth_pair_validation():
    with pytest.raises(ValueError):
        BandwidthPair(0.1, -0.2, Selector.MANUAL)
    assert BandwidthPair(0.1, 0.2, "afo").to_dict()["selector"] == "afo"


def test_dispatch(truth, triangular):
    q = truth(1)
    assert select_bandwidths(Selector.AFO, q, triangular, 500).selector is Selector.AFO
    assert select_bandwidths("ind", q, triangular, 500).selector is Selector.IND
    with pytest.raises(ValueError):
        select_bandwidths(Selector.MMSE, q, triangular, 500)
    with pytest.raises(ValueError):
        select_bandwidths(Selector.MANUAL, q, triangular, 500)


def test_design1_afo_values(truth, triangular):
    h = afo_bandwidths(truth(1), triangular, 500)
    assert h.h1 == pytest.approx(0.198, abs=0.002)
    assert h.h0 == pytest.approx(0.148, abs=0.002)
