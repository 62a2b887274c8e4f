"""Training and evaluation facade over the four committee models.

Every model standardizes its inputs with statistics captured at training time,
so all public functions take raw (row, col) features.

Hyperparameters:
    linear_svm          linear kernel, box constraint 1
    gaussian_svm        k(x, y) = exp(-||x - y||^2 / 5.7^2), box constraint 1
    decision_tree       Gini, at most 100 splits, min leaf size 1
    linear_discriminant pooled full covariance + 1e-6 ridge, equal priors
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from src.core.exceptions import ModelKindError, ParameterError
from src.core.lattice import apply_standardizer_many
from src.core.types import (
    DECISION_TREE,
    GAUSSIAN_SVM,
    LINEAR_DISCRIMINANT,
    LINEAR_SVM,
    MODEL_KINDS,
    SVM_KINDS,
    FeatureStats,
    Posterior,
    TrainedModel,
)
from src.models.discriminant import discriminant_log_odds, fit_discriminant
from src.models.svm import (
    GAUSSIAN,
    GAUSSIAN_KERNEL_SCALE,
    LINEAR,
    fit_svm,
    svm_decision,
)
from src.models.tree import LEAF, fit_tree, tree_posterior

logger = logging.getLogger("qalretrieve")

LabeledPoint = tuple[Sequence[float], int]


def _training_standardizer(points: np.ndarray) -> FeatureStats:
    # Like fit_standardizer, but a single point or a constant feature keeps scale 1.
    mean = points.mean(axis=0)
    if points.shape[0] < 2:
        std = np.ones(points.shape[1])
    else:
        std = points.std(axis=0, ddof=1)
        std = np.where(std > 0.0, std, 1.0)
    return FeatureStats(mean=tuple(mean.tolist()), std=tuple(std.tolist()))


def train(kind: str, labeled_points: Sequence[LabeledPoint]) -> TrainedModel:
    """Fit one model on (features, class) pairs.

    Raises:
        ParameterError: unknown kind, empty training set, ragged features or a
            class outside {0, 1}
    """
    if kind not in MODEL_KINDS:
        raise ParameterError(f"Unknown model kind '{kind}'")
    if not labeled_points:
        raise ParameterError("Training set is empty")

    try:
        raw = np.array([features for features, _ in labeled_points], dtype=float)
    except ValueError as e:
        raise ParameterError(f"Training features must share one dimension: {e}")
    if raw.ndim != 2:
        raise ParameterError(f"Expected feature vectors, got shape {raw.shape}")
    labels = np.array([label for _, label in labeled_points], dtype=int)
    if not np.isin(labels, (0, 1)).all():
        raise ParameterError("Class labels must be 0 or 1")

    stats = _training_standardizer(raw)
    classes = np.unique(labels)
    if classes.size == 1:
        return TrainedModel(kind=kind, parameters=None, standardizer=stats,
                            constant_class=int(classes[0]), n_train=len(labels))

    points = apply_standardizer_many(stats, raw)
    if kind == LINEAR_SVM:
        parameters = fit_svm(points, np.where(labels == 0, 1, -1), LINEAR)
    elif kind == GAUSSIAN_SVM:
        parameters = fit_svm(points, np.where(labels == 0, 1, -1), GAUSSIAN,
                             kernel_scale=GAUSSIAN_KERNEL_SCALE)
    elif kind == DECISION_TREE:
        parameters = fit_tree(points, labels)
    else:
        parameters = fit_discriminant(points, labels)

    return TrainedModel(kind=kind, parameters=parameters, standardizer=stats,
                        n_train=len(labels))


def _standardized(model: TrainedModel, points: np.ndarray) -> np.ndarray:
    data = np.asarray(points, dtype=float)
    if data.ndim == 1:
        data = data[None, :]
    return apply_standardizer_many(model.standardizer, data)


def _single(model: TrainedModel, point: Sequence[float]) -> np.ndarray:
    vector = np.asarray(point, dtype=float)
    if vector.shape != (model.standardizer.dimension,):
        raise ParameterError(
            f"Expected a {model.standardizer.dimension}-d point, got shape {vector.shape}"
        )
    return vector[None, :]


def decision_values(model: TrainedModel, points: np.ndarray) -> np.ndarray:
    """Signed SVM margins f(x) for an (N, d) array of raw points.

    A single-class model returns +inf (class 0) or -inf (class 1) everywhere.

    Raises:
        ModelKindError: model is not an SVM
    """
    if model.kind not in SVM_KINDS:
        raise ModelKindError(f"decision_value is undefined for '{model.kind}'")
    standardized = _standardized(model, points)
    if model.constant_class is not None:
        value = np.inf if model.constant_class == 0 else -np.inf
        return np.full(standardized.shape[0], value)
    return svm_decision(model.parameters, standardized)


def posteriors(model: TrainedModel, points: np.ndarray) -> np.ndarray:
    """(N, 2) array of (p0, p1) for raw points."""
    standardized = _standardized(model, points)
    n = standardized.shape[0]
    if model.constant_class is not None:
        result = np.zeros((n, 2))
        result[:, model.constant_class] = 1.0
        return result
    if model.kind in SVM_KINDS:
        score = svm_decision(model.parameters, standardized)
    elif model.kind == LINEAR_DISCRIMINANT:
        score = discriminant_log_odds(model.parameters, standardized)
    else:
        return tree_posterior(model.parameters, standardized)
    return np.column_stack([expit(score), expit(-score)])


def predict_many(model: TrainedModel, points: np.ndarray) -> np.ndarray:
    """Argmax-posterior classes; an exact tie goes to class 0."""
    probs = posteriors(model, points)
    return np.where(probs[:, 0] >= probs[:, 1], 0, 1)


def decision_value(model: TrainedModel, point: Sequence[float]) -> float:
    """f(x) = sum_i beta_i y_i k(x_i, x) + b in standardized feature space."""
    return float(decision_values(model, _single(model, point))[0])


def posterior(model: TrainedModel, point: Sequence[float]) -> Posterior:
    p0, p1 = posteriors(model, _single(model, point))[0]
    return Posterior(p0=float(p0), p1=float(p1))


def predict(model: TrainedModel, point: Sequence[float]) -> int:
    return int(predict_many(model, _single(model, point))[0])


def linear_boundary(model: TrainedModel) -> Optional[tuple[float, float, float]]:
    """Separating line a*x0 + b*x1 + c = 0 of a linear SVM in raw coordinates."""
    if model.kind != LINEAR_SVM or model.constant_class is not None:
        return None
    weights = model.parameters.weights / np.asarray(model.standardizer.std)
    c = model.parameters.bias - float(weights @ np.asarray(model.standardizer.mean))
    return (float(weights[0]), float(weights[1]), c)


def dump_model(model: TrainedModel) -> str:
    """Debug dump as key=value lines. Not a stable format."""
    lines = [
        f"kind={model.kind}",
        f"n_train={model.n_train}",
        f"mean={','.join(repr(v) for v in model.standardizer.mean)}",
        f"std={','.join(repr(v) for v in model.standardizer.std)}",
    ]
    if model.constant_class is not None:
        lines.append(f"constant_class={model.constant_class}")
        return "\n".join(lines)

    params = model.parameters
    if model.kind in SVM_KINDS:
        lines += [
            f"kernel={params.kernel}",
            f"kernel_scale={params.kernel_scale!r}",
            f"box_constraint={params.box_constraint!r}",
            f"bias={params.bias!r}",
            f"iterations={params.iterations}",
            f"support_count={params.support_indices.size}",
            f"dual_coef={','.join(repr(float(v)) for v in params.dual_coef)}",
        ]
        if params.weights is not None:
            lines.append(f"weights={','.join(repr(float(v)) for v in params.weights)}")
    elif model.kind == DECISION_TREE:
        lines.append(f"n_splits={params.n_splits}")
        for index, node in enumerate(params.nodes):
            if node.feature == LEAF:
                lines.append(f"node{index}=leaf p0={node.posterior[0]!r} n={node.n_samples}")
            else:
                lines.append(f"node{index}=split x{node.feature}<={node.threshold!r} "
                             f"left={node.left} right={node.right} gini={node.gini!r}")
    else:
        lines += [
            f"mean0={','.join(repr(float(v)) for v in params.means[0])}",
            f"mean1={','.join(repr(float(v)) for v in params.means[1])}",
            f"coef={','.join(repr(float(v)) for v in params.coef)}",
            f"intercept={params.intercept!r}",
        ]
    return "\n".join(lines)
