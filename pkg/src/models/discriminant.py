"""Two-class linear discriminant with pooled full covariance and equal priors."""

from dataclasses import dataclass

import numpy as np

RIDGE = 1e-6


@dataclass(frozen=True)
class DiscriminantParameters:
    means: np.ndarray                # (2, d), row k = mean of class k
    covariance: np.ndarray           # pooled, ridge included
    coef: np.ndarray                 # log P(0|x)/P(1|x) = coef . x + intercept
    intercept: float


def fit_discriminant(points: np.ndarray, labels: np.ndarray,
                     ridge: float = RIDGE) -> DiscriminantParameters:
    """Fit class means and the pooled within-class covariance (divisor N - 2)."""
    dim = points.shape[1]
    means = np.vstack([points[labels == k].mean(axis=0) for k in (0, 1)])
    centered = points - means[labels]
    dof = max(points.shape[0] - 2, 1)
    covariance = centered.T @ centered / dof + ridge * np.eye(dim)

    precision = np.linalg.inv(covariance)
    coef = precision @ (means[0] - means[1])
    intercept = -0.5 * (means[0] @ precision @ means[0] - means[1] @ precision @ means[1])
    return DiscriminantParameters(
        means=means,
        covariance=covariance,
        coef=coef,
        intercept=float(intercept),
    )


def discriminant_log_odds(params: DiscriminantParameters, points: np.ndarray) -> np.ndarray:
    return points @ params.coef + params.intercept
