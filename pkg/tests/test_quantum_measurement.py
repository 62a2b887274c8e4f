"""Tests for weak and strong measurement of qubit ensembles."""

import logging
import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.adapters.measurement_adapter import MeasurementAdapter
from src.adapters.quantum_measurement import (
    StrongMeasurementAdapter,
    WeakMeasurementAdapter,
    create_measurement_adapter,
    fidelity_after_weak,
    measure_ensemble,
    measurement_rng,
    post_weak_angle,
    sample_strong,
    sample_weak,
    system_fidelity,
    weak_cdf,
    weak_pdf,
)
from src.core.exceptions import ParameterError
from src.core.types import STRONG, WEAK, MeasurementConfig, MeasurementRecord, QubitSite

ALPHA_GRID = [k * math.pi / 6 for k in range(7)]
SIGMA_GRID = [1.0, 5.0, 10.0, 100.0]


def _site(cos_alpha: float) -> QubitSite:
    return QubitSite(row=3, col=4, alpha=math.acos(cos_alpha),
                     true_class=0 if cos_alpha > 0 else 1, cos_alpha=cos_alpha)


def _record(min_fidelity: float) -> MeasurementRecord:
    return MeasurementRecord(site_id=0, kind=WEAK, readings=(0.0,), post_angles=(0.0,),
                             copy_fidelities=(min_fidelity,), min_fidelity=min_fidelity,
                             estimated_label=0)


def _mislabel_rate(cos_alpha: float, config: MeasurementConfig, repetitions: int) -> float:
    site = _site(cos_alpha)
    rng = np.random.default_rng(2024)
    wrong = sum(measure_ensemble(site, config, rng).estimated_label != site.true_class
                for _ in range(repetitions))
    return wrong / repetitions


class TestWeakPdf:
    """Test the two-branch reading density."""

    def test_alpha_zero_is_single_gaussian(self):
        q = np.linspace(-40, 40, 81)
        np.testing.assert_allclose(weak_pdf(q, 0.0, 10.0), stats.norm.pdf(q, loc=1.0, scale=10.0),
                                   rtol=1e-12)

    def test_half_pi_is_symmetric(self):
        q = np.linspace(-30, 30, 61)
        np.testing.assert_allclose(weak_pdf(q, math.pi / 2, 10.0),
                                   weak_pdf(-q, math.pi / 2, 10.0), rtol=1e-12)

    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    @pytest.mark.parametrize("sigma", SIGMA_GRID)
    def test_integrates_to_one(self, alpha, sigma):
        total, _ = integrate.quad(weak_pdf, -10 * sigma, 10 * sigma, args=(alpha, sigma),
                                  epsabs=1e-13, epsrel=1e-13, limit=200)
        assert abs(total - 1.0) < 1e-9

    def test_scalar_in_scalar_out(self):
        assert isinstance(weak_pdf(0.3, 1.0, 10.0), float)

    @pytest.mark.parametrize("sigma", [0.0, -1.0])
    def test_rejects_non_positive_sigma(self, sigma):
        with pytest.raises(ParameterError):
            weak_pdf(0.0, 1.0, sigma)

    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    def test_close_to_single_gaussian_at_sigma_ten(self, alpha):
        sigma = 10.0

        def gap(q):
            return abs(weak_pdf(q, alpha, sigma) - stats.norm.pdf(q, loc=math.cos(alpha), scale=sigma))

        tv, _ = integrate.quad(gap, -12 * sigma, 12 * sigma, limit=400)
        assert 0.5 * tv < 0.01


class TestWeakCdf:
    """Test the reading distribution function."""

    @pytest.mark.parametrize("alpha", [0.0, math.pi / 3, math.pi])
    def test_matches_integrated_pdf(self, alpha):
        integral, _ = integrate.quad(weak_pdf, -200.0, 3.5, args=(alpha, 10.0),
                                     epsabs=1e-13, epsrel=1e-13, limit=200)
        assert weak_cdf(3.5, alpha, 10.0) == pytest.approx(integral, abs=1e-10)

    def test_limits(self):
        assert weak_cdf(-1e4, 1.0, 10.0) == pytest.approx(0.0, abs=1e-15)
        assert weak_cdf(1e4, 1.0, 10.0) == pytest.approx(1.0, abs=1e-15)


class TestPostWeakAngle:
    """Test the closed-form state update."""

    @staticmethod
    def _normalized_amplitudes(alpha, q0, sigma):
        # Amplitudes of the conditioned state: branch Gaussians are sqrt of the densities.
        up = math.cos(alpha / 2) * math.exp(-(q0 - 1.0) ** 2 / (4 * sigma ** 2))
        down = math.sin(alpha / 2) * math.exp(-(q0 + 1.0) ** 2 / (4 * sigma ** 2))
        norm = math.hypot(up, down)
        return up / norm, down / norm

    def test_matches_direct_normalization(self):
        alpha, q0, sigma = math.pi / 3, 2.0, 10.0
        up, down = self._normalized_amplitudes(alpha, q0, sigma)
        post = post_weak_angle(alpha, q0, sigma)
        assert math.cos(post / 2) == pytest.approx(up, abs=1e-12)
        assert math.sin(post / 2) == pytest.approx(down, abs=1e-12)

    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    @pytest.mark.parametrize("q0", [-25.0, -1.0, 0.0, 0.5, 13.0])
    def test_matches_direct_normalization_on_grid(self, alpha, q0):
        up, down = self._normalized_amplitudes(alpha, q0, 10.0)
        assert post_weak_angle(alpha, q0, 10.0) == pytest.approx(2 * math.atan2(down, up), abs=1e-12)

    def test_alpha_zero_is_undisturbed(self):
        for q0 in (-50.0, -1.0, 0.0, 3.0, 80.0):
            assert post_weak_angle(0.0, q0, 10.0) == 0.0

    def test_extreme_readings_do_not_overflow(self):
        assert post_weak_angle(math.pi / 2, 1e6, 1.0) == pytest.approx(0.0, abs=1e-12)
        assert post_weak_angle(math.pi / 2, -1e6, 1.0) == pytest.approx(math.pi, abs=1e-12)
        assert post_weak_angle(math.pi, 5.0, 10.0) == pytest.approx(math.pi)

    def test_vectorized(self):
        q0 = np.array([-1.0, 0.0, 1.0])
        result = post_weak_angle(math.pi / 2, q0, 10.0)
        assert result.shape == (3,)
        assert result[1] == pytest.approx(math.pi / 2)


class TestSampleWeak:
    """Test single weak readings."""

    def test_deterministic_for_seed(self):
        first = sample_weak(1.0, 10.0, np.random.default_rng(7))
        second = sample_weak(1.0, 10.0, np.random.default_rng(7))
        assert first == second

    def test_post_angle_follows_reading(self):
        q0, post = sample_weak(math.pi / 3, 10.0, np.random.default_rng(3))
        assert post == pytest.approx(post_weak_angle(math.pi / 3, q0, 10.0), abs=1e-15)

    def test_alpha_zero_keeps_state(self, rng):
        for _ in range(20):
            _, post = sample_weak(0.0, 10.0, rng)
            assert post == 0.0

    @pytest.mark.parametrize("alpha", [-0.1, math.pi + 0.1])
    def test_rejects_alpha_outside_range(self, alpha, rng):
        with pytest.raises(ParameterError):
            sample_weak(alpha, 10.0, rng)

    def test_rejects_bad_sigma(self, rng):
        with pytest.raises(ParameterError):
            sample_weak(1.0, 0.0, rng)

    def test_mean_reading_at_half_pi(self):
        rng = np.random.default_rng(11)
        draws = np.array([sample_weak(math.pi / 2, 10.0, rng)[0] for _ in range(100_000)])
        assert abs(draws.mean()) < 3 * 10.0 / math.sqrt(100_000)


class TestWeakReadingDistribution:
    """Monte-Carlo checks of the weak adapter against the density."""

    N = 100_000

    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    def test_mean_reading_estimates_cos_alpha(self, alpha):
        adapter = WeakMeasurementAdapter(sigma=10.0, n_copies=self.N)
        site = QubitSite(row=0, col=0, alpha=alpha, true_class=0, cos_alpha=math.cos(alpha))
        readings = np.array(adapter.measure(site, np.random.default_rng(5)).readings)
        assert abs(readings.mean() - math.cos(alpha)) < 4 * 10.0 / math.sqrt(self.N)

    @pytest.mark.parametrize("alpha", [0.0, math.pi / 3, math.pi / 2, math.pi])
    def test_goodness_of_fit(self, alpha):
        adapter = WeakMeasurementAdapter(sigma=10.0, n_copies=self.N)
        site = QubitSite(row=0, col=0, alpha=alpha, true_class=0, cos_alpha=math.cos(alpha))
        readings = adapter.measure(site, np.random.default_rng(17)).readings
        result = stats.kstest(readings, lambda q: weak_cdf(q, alpha, 10.0))
        assert result.pvalue > 0.001


class TestFidelityAfterWeak:
    """Test the squared-overlap fidelity."""

    def test_identity(self):
        assert fidelity_after_weak(1.2, 1.2) == 1.0

    def test_half_pi_reading_one(self):
        post = post_weak_angle(math.pi / 2, 1.0, 10.0)
        assert fidelity_after_weak(math.pi / 2, post) == pytest.approx(0.999975, abs=1e-6)

    @pytest.mark.parametrize("alpha", ALPHA_GRID)
    @pytest.mark.parametrize("q0", [-5e6, -3.0, 0.0, 1e5, 5e6])
    def test_huge_sigma_barely_disturbs(self, alpha, q0):
        post = post_weak_angle(alpha, q0, 1e6)
        assert fidelity_after_weak(alpha, post) >= 1.0 - 1e-9

    def test_orthogonal_states(self):
        assert fidelity_after_weak(0.0, math.pi) == pytest.approx(0.0, abs=1e-30)

    def test_rejects_angles_outside_range(self):
        with pytest.raises(ParameterError):
            fidelity_after_weak(-0.5, 0.0)
        with pytest.raises(ParameterError):
            fidelity_after_weak(0.0, 4.0)

    def test_expected_fidelity_grows_with_sigma(self):
        site = QubitSite(row=0, col=0, alpha=math.pi / 2, true_class=0, cos_alpha=0.0)
        means = []
        for sigma in (2.0, 5.0, 10.0, 50.0):
            record = WeakMeasurementAdapter(sigma, 20_000).measure(site, np.random.default_rng(9))
            means.append(np.mean(record.copy_fidelities))
        assert means == sorted(means)


class TestSampleStrong:
    """Test projective measurement of one copy."""

    def test_alpha_zero_always_up(self, rng):
        for _ in range(50):
            assert sample_strong(0.0, rng) == (1, 0.0, 1.0)

    def test_half_pi_frequencies(self):
        rng = np.random.default_rng(21)
        n = 100_000
        ups = sum(sample_strong(math.pi / 2, rng)[0] == 1 for _ in range(n))
        assert abs(ups / n - 0.5) < 3 * math.sqrt(0.25 / n)

    def test_pi_third_probabilities(self):
        rng = np.random.default_rng(4)
        outcomes = [sample_strong(math.pi / 3, rng) for _ in range(20_000)]
        ups = [o for o in outcomes if o[0] == 1]
        downs = [o for o in outcomes if o[0] == -1]
        assert ups[0][2] == pytest.approx(0.75)
        assert ups[0][1] == 0.0
        assert downs[0][2] == pytest.approx(0.25)
        assert downs[0][1] == math.pi
        assert abs(len(ups) / 20_000 - 0.75) < 3 * math.sqrt(0.75 * 0.25 / 20_000)

    def test_rejects_alpha_outside_range(self, rng):
        with pytest.raises(ParameterError):
            sample_strong(3.5, rng)


class TestMeasureEnsemble:
    """Test ensemble labeling events."""

    def test_single_copy_min_fidelity(self, rng):
        record = measure_ensemble(_site(0.3), MeasurementConfig(10.0, 1, WEAK), rng)
        assert len(record.readings) == 1
        assert record.min_fidelity == record.copy_fidelities[0]

    def test_record_invariants_weak(self, rng):
        site = _site(-0.4)
        record = measure_ensemble(site, MeasurementConfig(10.0, 200, WEAK), rng)
        assert record.site_id == site.site_id
        assert record.kind == WEAK
        assert len(record.readings) == len(record.post_angles) == len(record.copy_fidelities) == 200
        assert record.min_fidelity == min(record.copy_fidelities)
        expected = [fidelity_after_weak(site.alpha, post_weak_angle(site.alpha, q, 10.0))
                    for q in record.readings]
        np.testing.assert_allclose(record.copy_fidelities, expected, rtol=1e-12)
        assert record.estimated_label == (0 if np.mean(record.readings) > 0 else 1)

    def test_record_invariants_strong(self, rng):
        site = _site(0.2)
        record = measure_ensemble(site, MeasurementConfig(10.0, 300, STRONG), rng)
        up, down = math.cos(site.alpha / 2) ** 2, math.sin(site.alpha / 2) ** 2
        for outcome, fidelity in zip(record.readings, record.copy_fidelities):
            assert outcome in (1.0, -1.0)
            assert fidelity == pytest.approx(up if outcome == 1.0 else down)
        ups = sum(1 for o in record.readings if o == 1.0)
        assert record.estimated_label == (0 if ups > 150 else 1)

    def test_strong_both_outcomes_cost_half(self):
        site = QubitSite(row=0, col=0, alpha=math.pi / 2, true_class=0, cos_alpha=1e-3)
        record = measure_ensemble(site, MeasurementConfig(10.0, 50, STRONG), np.random.default_rng(8))
        assert set(record.readings) == {1.0, -1.0}
        assert record.min_fidelity == pytest.approx(0.5)
        assert system_fidelity([record]) <= 0.5 + 1e-12

    def test_weak_mislabel_rate_matches_normal_approximation(self):
        config = MeasurementConfig(10.0, 500, WEAK)
        expected = stats.norm.cdf(-0.3 / math.sqrt((100.0 + 1.0 - 0.09) / 500))
        assert expected == pytest.approx(0.25, abs=0.01)
        assert _mislabel_rate(0.3, config, 10_000) == pytest.approx(expected, abs=0.02)

    def test_strong_mislabel_rate_is_negligible(self):
        assert _mislabel_rate(0.3, MeasurementConfig(10.0, 500, STRONG), 2_000) < 1e-4

    def test_weak_mislabel_rate_falls_with_n(self):
        rates = [_mislabel_rate(0.3, MeasurementConfig(10.0, n, WEAK), 10_000)
                 for n in (5, 50, 100, 500)]
        assert all(a > b for a, b in zip(rates, rates[1:]))

    def test_deterministic_for_seed(self):
        config = MeasurementConfig(10.0, 100, WEAK)
        site = _site(0.5)
        assert (measure_ensemble(site, config, measurement_rng(3, site.site_id))
                == measure_ensemble(site, config, measurement_rng(3, site.site_id)))


class TestMeasurementConfig:
    """Test config validation."""

    def test_defaults(self):
        config = MeasurementConfig()
        assert (config.sigma, config.n_copies, config.kind) == (10.0, 500, WEAK)

    @pytest.mark.parametrize("kwargs", [
        {"n_copies": 0},
        {"sigma": 0.0},
        {"sigma": -2.0},
        {"kind": "medium"},
        {"n_copies": 2.5},
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(ParameterError):
            MeasurementConfig(**kwargs)

    def test_warns_outside_weak_regime(self, caplog):
        with caplog.at_level(logging.WARNING, logger="qalretrieve"):
            MeasurementConfig(sigma=2.0, n_copies=10, kind=WEAK)
        assert "weak regime" in caplog.text

    def test_strong_small_sigma_does_not_warn(self, caplog):
        with caplog.at_level(logging.WARNING, logger="qalretrieve"):
            MeasurementConfig(sigma=2.0, n_copies=10, kind=STRONG)
        assert caplog.text == ""


class TestAdapters:
    """Test adapter construction."""

    def test_factory_returns_matching_adapter(self):
        weak = create_measurement_adapter(MeasurementConfig(10.0, 5, WEAK))
        strong = create_measurement_adapter(MeasurementConfig(10.0, 5, STRONG))
        assert isinstance(weak, WeakMeasurementAdapter)
        assert isinstance(strong, StrongMeasurementAdapter)
        assert isinstance(weak, MeasurementAdapter)
        assert (weak.kind, strong.kind) == (WEAK, STRONG)
        assert weak.n_copies == strong.n_copies == 5

    def test_adapter_rejects_zero_copies(self):
        with pytest.raises(ParameterError):
            StrongMeasurementAdapter(0)


class TestSystemFidelity:
    """Test the product of per-record minima."""

    def test_empty_is_one(self):
        assert system_fidelity([]) == 1.0

    def test_product(self):
        assert system_fidelity([_record(0.99), _record(0.98)]) == pytest.approx(0.9702, abs=1e-12)


class TestMeasurementRng:
    """Test per-site derived streams."""

    def test_order_independent(self):
        first = measurement_rng(5, 10).random(3)
        measurement_rng(5, 11).random(3)
        assert np.array_equal(first, measurement_rng(5, 10).random(3))

    def test_streams_differ_by_site_and_seed(self):
        a = measurement_rng(5, 10).random()
        assert a != measurement_rng(5, 11).random()
        assert a != measurement_rng(6, 10).random()
