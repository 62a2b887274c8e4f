"""Binary CART classification tree with Gini's diversity index."""

import logging
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

logger = logging.getLogger("qalretrieve")

MAX_SPLITS = 100
LEAF = -1


@dataclass(frozen=True)
class TreeNode:
    feature: int                     # LEAF for terminal nodes
    threshold: float                 # x[feature] <= threshold goes left
    left: int
    right: int
    gini: float
    posterior: tuple[float, float]   # class fractions (p0, p1)
    n_samples: int


@dataclass(frozen=True)
class TreeParameters:
    nodes: tuple[TreeNode, ...]
    n_splits: int
    max_splits: int


def gini(labels: np.ndarray) -> float:
    if labels.size == 0:
        return 0.0
    p1 = labels.mean()
    return float(2.0 * p1 * (1.0 - p1))


def _best_split(points: np.ndarray, labels: np.ndarray) -> Optional[tuple[int, float]]:
    """Lowest weighted child Gini over all midpoints; ties keep the first found."""
    n = labels.size
    best: Optional[tuple[int, float]] = None
    best_score = np.inf
    for feature in range(points.shape[1]):
        order = np.argsort(points[:, feature], kind="stable")
        values = points[order, feature]
        sorted_labels = labels[order]
        ones_left = np.cumsum(sorted_labels)
        total_ones = ones_left[-1]
        for k in range(n - 1):
            if values[k] == values[k + 1]:
                continue
            n_left = k + 1
            n_right = n - n_left
            p_left = ones_left[k] / n_left
            p_right = (total_ones - ones_left[k]) / n_right
            score = (n_left * 2.0 * p_left * (1.0 - p_left)
                     + n_right * 2.0 * p_right * (1.0 - p_right)) / n
            if score < best_score:
                best_score = score
                best = (feature, float((values[k] + values[k + 1]) / 2.0))
    return best


def fit_tree(points: np.ndarray, labels: np.ndarray,
             max_splits: int = MAX_SPLITS) -> TreeParameters:
    """Grow breadth-first until every node is pure, unsplittable, or max_splits is reached.

    labels are class ids in {0, 1}. Minimum leaf size is 1; no pruning.
    """
    nodes: list[dict] = []
    queue: deque[tuple[int, np.ndarray]] = deque()

    def add_node(indices: np.ndarray) -> int:
        node_labels = labels[indices]
        p1 = float(node_labels.mean())
        nodes.append({
            "feature": LEAF, "threshold": 0.0, "left": LEAF, "right": LEAF,
            "gini": gini(node_labels), "posterior": (1.0 - p1, p1),
            "n_samples": int(indices.size),
        })
        return len(nodes) - 1

    root = add_node(np.arange(labels.size))
    queue.append((root, np.arange(labels.size)))
    n_splits = 0

    while queue and n_splits < max_splits:
        node_id, indices = queue.popleft()
        if nodes[node_id]["gini"] == 0.0:
            continue
        split = _best_split(points[indices], labels[indices])
        if split is None:
            continue
        feature, threshold = split
        goes_left = points[indices, feature] <= threshold
        left_id = add_node(indices[goes_left])
        right_id = add_node(indices[~goes_left])
        nodes[node_id].update(feature=feature, threshold=threshold,
                              left=left_id, right=right_id)
        queue.append((left_id, indices[goes_left]))
        queue.append((right_id, indices[~goes_left]))
        n_splits += 1

    return TreeParameters(
        nodes=tuple(TreeNode(**node) for node in nodes),
        n_splits=n_splits,
        max_splits=max_splits,
    )


def tree_leaves(params: TreeParameters, points: np.ndarray) -> np.ndarray:
    """Leaf node index reached by each point."""
    features = np.array([node.feature for node in params.nodes])
    thresholds = np.array([node.threshold for node in params.nodes])
    lefts = np.array([node.left for node in params.nodes])
    rights = np.array([node.right for node in params.nodes])

    current = np.zeros(points.shape[0], dtype=int)
    rows = np.arange(points.shape[0])
    for _ in range(len(params.nodes)):
        active = features[current] != LEAF
        if not active.any():
            break
        goes_left = points[rows, np.maximum(features[current], 0)] <= thresholds[current]
        step = np.where(goes_left, lefts[current], rights[current])
        current = np.where(active, step, current)
    return current


def tree_posterior(params: TreeParameters, points: np.ndarray) -> np.ndarray:
    """(N, 2) leaf class fractions."""
    table = np.array([node.posterior for node in params.nodes])
    return table[tree_leaves(params, points)]
