"""End-to-end reproductions of the headline results.

Tests marked slow run the full 100-replication sweeps; select them with
``pytest -m slow``.
"""

import math

import numpy as np
import pytest

from src.core.lattice import generate_lattice
from src.core.types import (
    QBC_VE,
    RANDOM,
    STRONG,
    USAMP_LC,
    WEAK,
    EpisodeConfig,
    MeasurementConfig,
)
from src.services.engine_service import (
    derive_seed,
    experiment_strategy_sweep,
    experiment_threshold_sweep,
    run_episode,
)


class TestWeakVersusStrong:
    """Weak readings cost less fidelity, so more labels fit under a threshold."""

    def test_weak_labels_more_sites(self):
        cells = experiment_threshold_sweep(thresholds=(0.9,), kinds=(WEAK, STRONG),
                                           n_values=(500,), replications=10)
        weak, strong = cells
        assert weak.mean_labels > strong.mean_labels

    def test_strong_ensemble_stops_after_one_label(self):
        measurement = MeasurementConfig(sigma=10.0, n_copies=500, kind=STRONG)
        in_band = stopped = 0
        for r in range(100):
            lattice = generate_lattice(derive_seed(0, 0, r))
            result = run_episode(lattice, EpisodeConfig(
                strategy=USAMP_LC, measurement=measurement, label_budget=22,
                fidelity_threshold=0.9, seed=derive_seed(0, 1, r),
            ))
            alpha = lattice.site(result.queries[0].site_id).alpha
            if 0.2 * math.pi < alpha < 0.8 * math.pi:
                in_band += 1
                stopped += result.labels_used == 1
        # 500 projective copies of a ramp-band qubit almost surely include the unlikely outcome.
        assert in_band >= 10
        assert stopped >= 0.95 * in_band

    @pytest.mark.slow
    def test_full_threshold_comparison(self):
        weak, strong = experiment_threshold_sweep(thresholds=(0.9,), kinds=(WEAK, STRONG),
                                                  n_values=(500,), replications=100)
        assert weak.mean_labels > strong.mean_labels
        assert weak.mean_accuracy >= strong.mean_accuracy


class TestSmallEnsembles:
    """Few copies per qubit produce wrong labels."""

    def test_mislabels_at_n5(self):
        (curve,) = experiment_strategy_sweep(strategies=(USAMP_LC,), n_values=(5,),
                                             budget=10, replications=10)
        assert curve.mean_mislabels > 0.0

    @pytest.mark.slow
    def test_final_accuracy_grows_with_n(self):
        curves = experiment_strategy_sweep(strategies=(RANDOM, USAMP_LC, QBC_VE),
                                           n_values=(5, 500), replications=100)
        by_key = {(c.strategy, c.n): c for c in curves}
        for strategy in (RANDOM, USAMP_LC, QBC_VE):
            assert by_key[(strategy, 5)].mean_mislabels > 0.0
            assert by_key[(strategy, 5)].mean_final_accuracy < by_key[(strategy, 500)].mean_final_accuracy


@pytest.mark.slow
class TestHeadline:
    """About 90% of the lattice recovered from 5% of its sites."""

    def test_usamp_accuracy_at_22_labels(self):
        (curve,) = experiment_strategy_sweep(strategies=(USAMP_LC,), n_values=(500,),
                                             budget=22, replications=100)
        assert curve.curve.labels[-1] == 22
        assert curve.curve.mean_accuracy[-1] >= 0.85

    def test_strategy_ordering(self):
        curves = experiment_strategy_sweep(strategies=(QBC_VE, USAMP_LC, RANDOM), n_values=(500,),
                                           budget=22, replications=100)
        qbc, usamp, rand = (np.array(c.curve.mean_accuracy) for c in curves)
        window = slice(10, 23)
        inversions = int(np.sum(qbc[window] < usamp[window]) + np.sum(usamp[window] < rand[window]))
        assert inversions <= 2
