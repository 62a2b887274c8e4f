"""Qubit lattice synthesis and feature standardization."""

import logging
import math
from typing import Sequence

import numpy as np

from src.core.exceptions import DegenerateStatisticsError, ParameterError
from src.core.types import (
    LATTICE_SIZE,
    Boundary,
    FeatureStats,
    LatticeState,
    QubitSite,
)

logger = logging.getLogger("qalretrieve")

DEFAULT_RAMP_WIDTH = 6.0
DEFAULT_EPSILON = 0.02


def generate_lattice(seed: int, ramp_width: float = DEFAULT_RAMP_WIDTH,
                     epsilon: float = DEFAULT_EPSILON) -> LatticeState:
    """Synthesize the 21x21 lattice with a linearly separable <sigma_z> field.

    A line with random orientation passes through the lattice center. Each
    site's <sigma_z> = cos(alpha) is a linear ramp in its signed distance d to
    that line, clamped to [-1 + epsilon, 1 - epsilon] and pushed at least
    epsilon away from zero. Sites with d == 0 take the side of a per-lattice
    coin flip. class 0 <=> cos(alpha) > 0.

    Args:
        seed: RNG seed; the same seed always yields the same lattice
        ramp_width: Lattice distance over which cos(alpha) goes from -1 to 1
        epsilon: Minimal |cos(alpha)| and the distance kept from +-1

    Raises:
        ParameterError: ramp_width <= 0 or epsilon outside (0, 0.1)
    """
    if not ramp_width > 0:
        raise ParameterError(f"ramp_width must be positive, got {ramp_width}")
    if not 0.0 < epsilon < 0.1:
        raise ParameterError(f"epsilon must lie in (0, 0.1), got {epsilon}")

    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2.0 * math.pi)
    on_line_sign = 1.0 if rng.random() < 0.5 else -1.0

    nx, ny = math.cos(theta), math.sin(theta)
    center = (LATTICE_SIZE - 1) / 2.0
    boundary = Boundary(normal=(nx, ny), offset=center * nx + center * ny)

    sites = []
    for row in range(LATTICE_SIZE):
        for col in range(LATTICE_SIZE):
            d = boundary.signed_distance(row, col)
            ramp = min(max(2.0 * d / ramp_width, -1.0 + epsilon), 1.0 - epsilon)
            side = math.copysign(1.0, d) if d != 0.0 else on_line_sign
            cos_alpha = side * max(abs(ramp), epsilon)
            sites.append(QubitSite(
                row=row,
                col=col,
                alpha=math.acos(cos_alpha),
                true_class=0 if cos_alpha > 0 else 1,
                cos_alpha=cos_alpha,
            ))

    lattice = LatticeState(
        sites=tuple(sites),
        boundary=boundary,
        ramp_width=float(ramp_width),
        seed=seed,
        epsilon=float(epsilon),
    )
    logger.debug(f"Generated lattice seed={seed} theta={theta:.4f} "
                 f"class0={sum(1 for s in sites if s.true_class == 0)}")
    return lattice


def lattice_rows(lattice: LatticeState) -> list[tuple[int, int, float, int]]:
    """Rows for lattice.csv: row, col, cos_alpha, true_class."""
    return [(s.row, s.col, s.cos_alpha, s.true_class) for s in lattice.sites]


def fit_standardizer(points: Sequence[Sequence[float]]) -> FeatureStats:
    """Fit per-feature mean and sample standard deviation (divisor N-1).

    Raises:
        DegenerateStatisticsError: fewer than 2 points or a zero-variance feature
        ParameterError: ragged input
    """
    data = _as_matrix(points)
    if data.shape[0] < 2:
        raise DegenerateStatisticsError(
            f"At least 2 points are needed, got {data.shape[0]}"
        )
    mean = data.mean(axis=0)
    std = data.std(axis=0, ddof=1)
    if np.any(std <= 0.0):
        raise DegenerateStatisticsError(
            f"Zero variance in feature(s) {np.flatnonzero(std <= 0.0).tolist()}"
        )
    return FeatureStats(mean=tuple(mean.tolist()), std=tuple(std.tolist()))


def apply_standardizer(stats: FeatureStats, point: Sequence[float]) -> np.ndarray:
    """Return (point - mean) / std.

    Raises:
        ParameterError: dimension mismatch
    """
    vector = np.asarray(point, dtype=float)
    if vector.shape != (stats.dimension,):
        raise ParameterError(
            f"Expected a {stats.dimension}-d point, got shape {vector.shape}"
        )
    return (vector - np.asarray(stats.mean)) / np.asarray(stats.std)


def apply_standardizer_many(stats: FeatureStats, points: np.ndarray) -> np.ndarray:
    """Row-wise apply_standardizer over an (N, d) array."""
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != stats.dimension:
        raise ParameterError(
            f"Expected an (N, {stats.dimension}) array, got shape {data.shape}"
        )
    return (data - np.asarray(stats.mean)) / np.asarray(stats.std)


def _as_matrix(points: Sequence[Sequence[float]]) -> np.ndarray:
    try:
        data = np.asarray(points, dtype=float)
    except ValueError as e:
        raise ParameterError(f"Points must share one dimension: {e}")
    if data.ndim != 2 or data.shape[1] == 0:
        if data.size == 0:
            raise DegenerateStatisticsError("At least 2 points are needed, got 0")
        raise ParameterError(f"Expected a list of feature vectors, got shape {data.shape}")
    return data
