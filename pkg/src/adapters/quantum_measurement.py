"""Weak (Gaussian-ancilla) and strong (projective) measurement of qubit ensembles.

Units: hbar = 1, sigma_z eigenvalues a1 = +1, a2 = -1. A qubit is
cos(alpha/2)|0> + sin(alpha/2)|1> with alpha in [0, pi], so <sigma_z> = cos(alpha).

A weak reading q0 is the ancilla position after the von Neumann coupling. Its
density is the two-branch mixture evaluated by weak_pdf; conditioned on q0 the
system collapses to amplitudes cos(alpha/2) g(q0 - 1), sin(alpha/2) g(q0 + 1)
with g the ancilla wave function, whose angle is
tan(alpha'/2) = tan(alpha/2) exp(-q0 / sigma^2).
"""

import logging
import math
from typing import Sequence, Union

import numpy as np
from scipy.stats import norm

from src.adapters.measurement_adapter import MeasurementAdapter
from src.core.exceptions import ParameterError
from src.core.types import (
    STRONG,
    WEAK,
    MeasurementConfig,
    MeasurementRecord,
    QubitSite,
)

logger = logging.getLogger("qalretrieve")

ArrayLike = Union[float, np.ndarray]

# SeedSequence spawn key separating measurement streams from selection streams
MEASUREMENT_STREAM = 1
# spawn key of the single-shot weak-value map
SINGLE_SHOT_STREAM = 2


def _check_sigma(sigma: float) -> None:
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")


def _check_alpha(alpha: float, name: str = "alpha") -> None:
    if not 0.0 <= alpha <= math.pi:
        raise ParameterError(f"{name} must lie in [0, pi], got {alpha}")


def weak_pdf(q: ArrayLike, alpha: float, sigma: float) -> ArrayLike:
    """Density of the ancilla reading q for a qubit at angle alpha.

    (2 pi sigma^2)^(-1/2) [cos^2(alpha/2) exp(-(q-1)^2 / 2 sigma^2)
                           + sin^2(alpha/2) exp(-(q+1)^2 / 2 sigma^2)]

    Raises:
        ParameterError: sigma <= 0
    """
    _check_sigma(sigma)
    c2 = math.cos(alpha / 2.0) ** 2
    s2 = math.sin(alpha / 2.0) ** 2
    q = np.asarray(q, dtype=float)
    density = (c2 * np.exp(-(q - 1.0) ** 2 / (2.0 * sigma ** 2))
               + s2 * np.exp(-(q + 1.0) ** 2 / (2.0 * sigma ** 2)))
    density = density / math.sqrt(2.0 * math.pi * sigma ** 2)
    return float(density) if density.ndim == 0 else density


def weak_cdf(q: ArrayLike, alpha: float, sigma: float) -> ArrayLike:
    """Cumulative distribution of the ancilla reading."""
    _check_sigma(sigma)
    c2 = math.cos(alpha / 2.0) ** 2
    s2 = math.sin(alpha / 2.0) ** 2
    result = c2 * norm.cdf(q, loc=1.0, scale=sigma) + s2 * norm.cdf(q, loc=-1.0, scale=sigma)
    return float(result) if np.ndim(result) == 0 else result


def post_weak_angle(alpha: float, q0: ArrayLike, sigma: float) -> ArrayLike:
    """Bloch angle after a weak reading q0: tan(a'/2) = tan(alpha/2) exp(-q0/sigma^2).

    Evaluated as an atan2 of rescaled amplitudes so that alpha = pi and extreme
    q0/sigma^2 do not overflow.
    """
    t = -np.asarray(q0, dtype=float) / sigma ** 2
    shift = np.abs(t) / 2.0
    upper = math.sin(alpha / 2.0) * np.exp(t / 2.0 - shift)
    lower = math.cos(alpha / 2.0) * np.exp(-t / 2.0 - shift)
    result = 2.0 * np.arctan2(upper, lower)
    return float(result) if np.ndim(result) == 0 else result


def sample_weak(alpha: float, sigma: float, rng: np.random.Generator) -> tuple[float, float]:
    """Draw one weak reading and the resulting post-measurement angle.

    Two-stage draw: branch +1 with probability cos^2(alpha/2), else -1, then a
    Gaussian of std sigma around the branch eigenvalue.

    Raises:
        ParameterError: sigma <= 0 or alpha outside [0, pi]
    """
    _check_sigma(sigma)
    _check_alpha(alpha)
    eigenvalue = 1.0 if rng.random() < math.cos(alpha / 2.0) ** 2 else -1.0
    q0 = eigenvalue + sigma * rng.standard_normal()
    return float(q0), post_weak_angle(alpha, q0, sigma)


def fidelity_after_weak(alpha: ArrayLike, post_alpha: ArrayLike) -> ArrayLike:
    """Squared overlap cos^2((alpha - alpha')/2) of two real-amplitude qubit states."""
    a = np.asarray(alpha, dtype=float)
    b = np.asarray(post_alpha, dtype=float)
    if np.any((a < 0.0) | (a > math.pi)) or np.any((b < 0.0) | (b > math.pi)):
        raise ParameterError("Bloch angles must lie in [0, pi]")
    result = np.cos((a - b) / 2.0) ** 2
    return float(result) if result.ndim == 0 else result


def sample_strong(alpha: float, rng: np.random.Generator) -> tuple[int, float, float]:
    """Projective sigma_z measurement of one copy.

    Returns:
        (outcome, post_alpha, fidelity): (+1, 0, cos^2(alpha/2)) with
        probability cos^2(alpha/2), otherwise (-1, pi, sin^2(alpha/2))
    """
    _check_alpha(alpha)
    p_up = math.cos(alpha / 2.0) ** 2
    if rng.random() < p_up:
        return 1, 0.0, p_up
    return -1, math.pi, math.sin(alpha / 2.0) ** 2


def _break_tie(rng: np.random.Generator) -> int:
    return int(rng.integers(2))


class WeakMeasurementAdapter(MeasurementAdapter):
    """Gaussian-ancilla measurement; the label is the sign of the mean reading."""

    kind = WEAK

    def __init__(self, sigma: float, n_copies: int):
        _check_sigma(sigma)
        super().__init__(n_copies)
        self._sigma = sigma

    def measure(self, site: QubitSite, rng: np.random.Generator) -> MeasurementRecord:
        _check_alpha(site.alpha)
        alpha, sigma, n = site.alpha, self._sigma, self._n_copies
        eigenvalues = np.where(rng.random(n) < math.cos(alpha / 2.0) ** 2, 1.0, -1.0)
        readings = eigenvalues + sigma * rng.standard_normal(n)
        post = np.atleast_1d(post_weak_angle(alpha, readings, sigma))
        fidelities = np.cos((alpha - post) / 2.0) ** 2

        mean_reading = float(readings.mean())
        if mean_reading > 0.0:
            label = 0
        elif mean_reading < 0.0:
            label = 1
        else:
            label = _break_tie(rng)

        return MeasurementRecord(
            site_id=site.site_id,
            kind=self.kind,
            readings=tuple(readings.tolist()),
            post_angles=tuple(post.tolist()),
            copy_fidelities=tuple(fidelities.tolist()),
            min_fidelity=float(fidelities.min()),
            estimated_label=label,
        )


class StrongMeasurementAdapter(MeasurementAdapter):
    """Projective measurement; the label is the majority outcome."""

    kind = STRONG

    def measure(self, site: QubitSite, rng: np.random.Generator) -> MeasurementRecord:
        _check_alpha(site.alpha)
        alpha, n = site.alpha, self._n_copies
        p_up = math.cos(alpha / 2.0) ** 2
        up = rng.random(n) < p_up
        outcomes = np.where(up, 1, -1)
        post = np.where(up, 0.0, math.pi)
        fidelities = np.where(up, p_up, math.sin(alpha / 2.0) ** 2)

        ups = int(up.sum())
        downs = n - ups
        if ups > downs:
            label = 0
        elif downs > ups:
            label = 1
        else:
            label = _break_tie(rng)

        return MeasurementRecord(
            site_id=site.site_id,
            kind=self.kind,
            readings=tuple(float(o) for o in outcomes),
            post_angles=tuple(post.tolist()),
            copy_fidelities=tuple(fidelities.tolist()),
            min_fidelity=float(fidelities.min()),
            estimated_label=label,
        )


def create_measurement_adapter(config: MeasurementConfig) -> MeasurementAdapter:
    """Build the adapter matching config.kind."""
    if config.kind == WEAK:
        return WeakMeasurementAdapter(config.sigma, config.n_copies)
    return StrongMeasurementAdapter(config.n_copies)


def measure_ensemble(site: QubitSite, config: MeasurementConfig,
                     rng: np.random.Generator) -> MeasurementRecord:
    """Measure each of the config.n_copies copies of site once.

    Raises:
        ParameterError: invalid config (n_copies < 1, sigma <= 0)
    """
    if config.n_copies < 1:
        raise ParameterError(f"n_copies must be >= 1, got {config.n_copies}")
    return create_measurement_adapter(config).measure(site, rng)


def system_fidelity(records: Sequence[MeasurementRecord]) -> float:
    """Product of each labeled qubit's minimal copy fidelity; 1 when nothing was measured."""
    return math.prod(record.min_fidelity for record in records)


def measurement_rng(seed: int, site_id: int,
                    stream: int = MEASUREMENT_STREAM) -> np.random.Generator:
    """Independent stream for measuring one site, derived from (seed, stream, site_id).

    Results do not depend on the order in which sites are measured.
    """
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(stream, site_id))
    )
