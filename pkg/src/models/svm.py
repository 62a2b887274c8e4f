"""Soft-margin SVM trained in the dual by SMO with maximal-violating-pair selection."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

logger = logging.getLogger("qalretrieve")

LINEAR = "linear"
GAUSSIAN = "gaussian"

BOX_CONSTRAINT = 1.0
GAUSSIAN_KERNEL_SCALE = 5.7
KKT_TOLERANCE = 1e-6
MAX_ITERATIONS = 100_000

# curvature floor for pairs of coincident points
_TAU = 1e-12


@dataclass(frozen=True)
class SvmParameters:
    """Dual solution in standardized feature space.

    f(x) = sum_i dual_coef[i] * labels[i] * k(points[i], x) + bias, labels in {+1, -1}
    with +1 meaning class 0.
    """

    kernel: str
    kernel_scale: float
    box_constraint: float
    points: np.ndarray
    labels: np.ndarray
    dual_coef: np.ndarray
    bias: float
    weights: Optional[np.ndarray]    # primal w, linear kernel only
    iterations: int

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.dual_coef > 0.0)


def kernel_matrix(kernel: str, a: np.ndarray, b: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Gram matrix between rows of a and rows of b.

    linear: <x, y>; gaussian: exp(-||x - y||^2 / scale^2).
    """
    if kernel == LINEAR:
        return a @ b.T
    sq = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-sq / scale ** 2)


def solve_dual(gram: np.ndarray, y: np.ndarray, box: float = BOX_CONSTRAINT,
               tol: float = KKT_TOLERANCE,
               max_iter: int = MAX_ITERATIONS) -> tuple[np.ndarray, float, int]:
    """Minimize 1/2 a^T Q a - e^T a s.t. 0 <= a <= box, y^T a = 0, Q_ij = y_i y_j K_ij.

    Each step moves the pair (i, j) that violates the KKT conditions the most:
    a_i += y_i * lam, a_j -= y_j * lam. Stops when the violation gap is below tol.

    Returns:
        (dual coefficients, bias, iterations)
    """
    n = len(y)
    alpha = np.zeros(n)
    grad = -np.ones(n)

    iterations = 0
    while iterations < max_iter:
        score = -y * grad
        up = ((y > 0) & (alpha < box)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < box))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(score[up])])
        j = int(np.flatnonzero(low)[np.argmin(score[low])])
        gap = score[i] - score[j]
        if gap < tol:
            break

        curvature = gram[i, i] + gram[j, j] - 2.0 * gram[i, j]
        step = gap / max(curvature, _TAU)
        room_i = box - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else box - alpha[j]
        step = min(step, room_i, room_j)

        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        alpha[i] = min(max(alpha[i], 0.0), box)
        alpha[j] = min(max(alpha[j], 0.0), box)
        grad += y * step * (gram[:, i] - gram[:, j])
        iterations += 1
    else:
        logger.warning(f"SMO stopped at max_iter={max_iter} before reaching tol={tol}")

    bias = _bias(alpha, y, grad, box)
    return alpha, bias, iterations


def _bias(alpha: np.ndarray, y: np.ndarray, grad: np.ndarray, box: float) -> float:
    # Free vectors satisfy y_t f(x_t) = 1, i.e. b = -y_t grad_t.
    score = -y * grad
    free = (alpha > 0.0) & (alpha < box)
    if free.any():
        return float(score[free].mean())
    up = ((y > 0) & (alpha < box)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < box))
    bounds = []
    if up.any():
        bounds.append(score[up].max())
    if low.any():
        bounds.append(score[low].min())
    return float(np.mean(bounds)) if bounds else 0.0


def fit_svm(points: np.ndarray, labels: np.ndarray, kernel: str,
            kernel_scale: float = 1.0, box: float = BOX_CONSTRAINT) -> SvmParameters:
    """Fit a soft-margin SVM on standardized points with labels in {+1, -1}."""
    y = labels.astype(float)
    gram = kernel_matrix(kernel, points, points, kernel_scale)
    alpha, bias, iterations = solve_dual(gram, y, box)
    weights = (alpha * y) @ points if kernel == LINEAR else None
    logger.debug(f"SMO {kernel} n={len(y)} iterations={iterations} "
                 f"support={int((alpha > 0).sum())}")
    return SvmParameters(
        kernel=kernel,
        kernel_scale=kernel_scale,
        box_constraint=box,
        points=points.copy(),
        labels=y,
        dual_coef=alpha,
        bias=bias,
        weights=weights,
        iterations=iterations,
    )


def svm_decision(params: SvmParameters, points: np.ndarray) -> np.ndarray:
    """Signed margins f(x) for standardized points, shape (N,)."""
    support = params.support_indices
    if support.size == 0:
        return np.full(points.shape[0], params.bias)
    gram = kernel_matrix(params.kernel, params.points[support], points, params.kernel_scale)
    return (params.dual_coef[support] * params.labels[support]) @ gram + params.bias
