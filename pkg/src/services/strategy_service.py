"""Query strategies: scoring functions and candidate selection."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import xlogy

from src.core.exceptions import ParameterError, SelectionError
from src.core.types import (
    LINEAR_SVM,
    MODEL_KINDS,
    QBC_STRATEGIES,
    QBC_VE,
    RANDOM,
    STRATEGIES,
    SVM_KINDS,
    USAMP_ENTROPY,
    USAMP_LC,
    USAMP_MARGIN,
    USAMP_STRATEGIES,
    Posterior,
    QueryDecision,
    TrainedModel,
)
from src.models.classifiers import decision_values, posteriors, predict_many

logger = logging.getLogger("qalretrieve")

LEAST_CONFIDENCE = "least_confidence"
MARGIN = "margin"
ENTROPY = "entropy"

# Keys within this relative distance of the extremum count as tied.
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Committee:
    """Ordered committee of fitted models; order is fixed within an episode."""

    members: tuple[TrainedModel, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.members:
            raise ParameterError("A committee needs at least one member")

    @property
    def size(self) -> int:
        return len(self.members)

    def svm_member(self) -> TrainedModel:
        """The linear SVM if present, else the first SVM member."""
        for kind in (LINEAR_SVM,) + SVM_KINDS:
            for member in self.members:
                if member.kind == kind:
                    return member
        raise ParameterError("Committee has no SVM member")


def committee_kinds(strategy: str) -> tuple[str, ...]:
    """Model kinds a strategy trains each iteration."""
    if strategy in QBC_STRATEGIES:
        return MODEL_KINDS
    return (LINEAR_SVM,)


def score_least_confidence(post: Posterior) -> float:
    """1 - max(p0, p1); higher is more informative."""
    return 1.0 - max(post.p0, post.p1)


def score_margin(post: Posterior) -> float:
    """p(first) - p(second); lower is more informative."""
    return max(post.p0, post.p1) - min(post.p0, post.p1)


def score_entropy(post: Posterior) -> float:
    """Shannon entropy in nats with 0 log 0 = 0; higher is more informative."""
    return float(-(xlogy(post.p0, post.p0) + xlogy(post.p1, post.p1)))


def vote_entropy(votes: Sequence[int], committee_size: int) -> float:
    """-sum_i (V_i / C) log(V_i / C) over per-class hard-vote counts.

    Raises:
        ParameterError: votes do not sum to committee_size
    """
    if sum(votes) != committee_size or committee_size < 1 or min(votes) < 0:
        raise ParameterError(f"Votes {list(votes)} do not sum to committee size {committee_size}")
    shares = np.asarray(votes, dtype=float) / committee_size
    return float(-xlogy(shares, shares).sum())


def kl_disagreement(member_posteriors: Sequence[Posterior]) -> float:
    """Mean KL divergence of each member's posterior from the committee average."""
    if not member_posteriors:
        raise ParameterError("KL disagreement needs at least one member")
    probs = np.array([p.as_tuple() for p in member_posteriors], dtype=float)
    consensus = probs.mean(axis=0)
    # p log(p / q) with 0 log 0 = 0; q > 0 wherever p > 0
    terms = xlogy(probs, probs) - xlogy(probs, consensus)
    return max(float(terms.sum(axis=1).mean()), 0.0)


_UNCERTAINTY_MEASURES: dict[str, tuple[Callable[[Posterior], float], bool]] = {
    LEAST_CONFIDENCE: (score_least_confidence, True),
    MARGIN: (score_margin, False),
    ENTROPY: (score_entropy, True),
}

_USAMP_MEASURE = {
    USAMP_LC: LEAST_CONFIDENCE,
    USAMP_MARGIN: MARGIN,
    USAMP_ENTROPY: ENTROPY,
}


def _extremal(keys: Mapping[int, float], maximize: bool) -> tuple[int, ...]:
    if not keys:
        raise SelectionError()
    target = max(keys.values()) if maximize else min(keys.values())
    tolerance = TIE_TOLERANCE * max(1.0, abs(target)) if np.isfinite(target) else 0.0
    if maximize:
        return tuple(sorted(site for site, key in keys.items() if key >= target - tolerance))
    return tuple(sorted(site for site, key in keys.items() if key <= target + tolerance))


def select_by_uncertainty(posteriors_by_site: Mapping[int, Posterior],
                          measure: str) -> QueryDecision:
    """Pick the least certain candidate under one uncertainty measure.

    For binary posteriors least confidence, margin and entropy rank candidates
    identically. Residual ties go to the lowest site id.
    """
    if measure not in _UNCERTAINTY_MEASURES:
        raise ParameterError(f"Unknown uncertainty measure '{measure}'")
    score_fn, maximize = _UNCERTAINTY_MEASURES[measure]
    scores = {site: score_fn(post) for site, post in posteriors_by_site.items()}
    tie_set = _extremal(scores, maximize)
    return QueryDecision(site_id=tie_set[0], scores=scores, tie_set=tie_set)


def select_candidate(strategy: str, models: Committee,
                     unlabeled: Mapping[int, Sequence[float]],
                     rng: np.random.Generator) -> QueryDecision:
    """Choose the next site to measure.

    random: uniform draw. usamp_*: minimal |f| of the linear SVM; scores carry
    the variant's uncertainty of the logistic posterior. qbc_ve / qbc_kl:
    maximal vote entropy / KL disagreement, ties broken by minimal |f| of the
    committee's SVM member. Any tie left goes to the lowest site id.

    Raises:
        SelectionError: no unlabeled candidates
        ParameterError: unknown strategy
    """
    if strategy not in STRATEGIES:
        raise ParameterError(f"Unknown strategy '{strategy}'")
    if not unlabeled:
        raise SelectionError()

    site_ids = sorted(unlabeled)
    points = np.array([unlabeled[site] for site in site_ids], dtype=float)

    if strategy == RANDOM:
        chosen = site_ids[int(rng.integers(len(site_ids)))]
        return QueryDecision(site_id=chosen, scores={s: 0.0 for s in site_ids},
                             tie_set=tuple(site_ids))

    distance = np.abs(decision_values(models.svm_member(), points))

    if strategy in USAMP_STRATEGIES:
        score_fn, _ = _UNCERTAINTY_MEASURES[_USAMP_MEASURE[strategy]]
        probs = posteriors(models.svm_member(), points)
        scores = {site: score_fn(Posterior(float(p0), float(p1)))
                  for site, (p0, p1) in zip(site_ids, probs)}
        tie_set = _extremal(dict(zip(site_ids, distance.tolist())), maximize=False)
        return QueryDecision(site_id=tie_set[0], scores=scores, tie_set=tie_set)

    if strategy == QBC_VE:
        votes_for_one = np.zeros(len(site_ids), dtype=int)
        for member in models.members:
            votes_for_one += predict_many(member, points)
        disagreement = [vote_entropy((models.size - v, v), models.size)
                        for v in votes_for_one.tolist()]
    else:
        member_probs = [posteriors(member, points) for member in models.members]
        disagreement = [
            kl_disagreement([Posterior(float(m[k, 0]), float(m[k, 1])) for m in member_probs])
            for k in range(len(site_ids))
        ]

    scores = dict(zip(site_ids, disagreement))
    top = set(_extremal(scores, maximize=True))
    nearest = _extremal({site: d for site, d in zip(site_ids, distance.tolist()) if site in top},
                        maximize=False)
    logger.debug(f"{strategy}: {len(top)} candidates at max disagreement "
                 f"{max(disagreement):.4f}, {len(nearest)} after distance tie-break")
    return QueryDecision(site_id=nearest[0], scores=scores, tie_set=nearest)

