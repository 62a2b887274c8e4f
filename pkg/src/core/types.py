"""Data Transfer Objects for qalretrieve."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from src.core.exceptions import ParameterError

logger = logging.getLogger("qalretrieve")

LATTICE_SIZE = 21
NUM_SITES = LATTICE_SIZE * LATTICE_SIZE

WEAK = "weak"
STRONG = "strong"
MEASUREMENT_KINDS = (WEAK, STRONG)

LINEAR_SVM = "linear_svm"
GAUSSIAN_SVM = "gaussian_svm"
DECISION_TREE = "decision_tree"
LINEAR_DISCRIMINANT = "linear_discriminant"
MODEL_KINDS = (LINEAR_SVM, GAUSSIAN_SVM, DECISION_TREE, LINEAR_DISCRIMINANT)
SVM_KINDS = (LINEAR_SVM, GAUSSIAN_SVM)

RANDOM = "random"
USAMP_LC = "usamp_lc"
USAMP_MARGIN = "usamp_margin"
USAMP_ENTROPY = "usamp_entropy"
QBC_VE = "qbc_ve"
QBC_KL = "qbc_kl"
STRATEGIES = (RANDOM, USAMP_LC, USAMP_MARGIN, USAMP_ENTROPY, QBC_VE, QBC_KL)
USAMP_STRATEGIES = (USAMP_LC, USAMP_MARGIN, USAMP_ENTROPY)
QBC_STRATEGIES = (QBC_VE, QBC_KL)

EXPERIMENTS = ("figure1", "figure2", "figure3")

# Below this ancilla spread the single-Gaussian approximation of the reading
# distribution degrades noticeably.
WEAK_REGIME_SIGMA = 5.0

# |p0 + p1 - 1| allowed in a Posterior
POSTERIOR_TOLERANCE = 1e-12


@dataclass(frozen=True)
class QubitSite:
    """One lattice cell prepared by Alice."""

    row: int
    col: int
    alpha: float                     # Bloch polar angle in (0, pi)
    true_class: int                  # 0 <=> cos(alpha) > 0
    cos_alpha: float = 0.0           # <sigma_z>, kept exactly as generated

    @property
    def site_id(self) -> int:
        return self.row * LATTICE_SIZE + self.col


@dataclass(frozen=True)
class Boundary:
    """Ground-truth separator: unit normal . (row, col) = offset."""

    normal: tuple[float, float]
    offset: float

    def signed_distance(self, row: float, col: float) -> float:
        return row * self.normal[0] + col * self.normal[1] - self.offset


@dataclass(frozen=True)
class LatticeState:
    """Immutable 21x21 qubit lattice with ground truth."""

    sites: tuple[QubitSite, ...]     # row-major
    boundary: Boundary
    ramp_width: float
    seed: int
    epsilon: float = 0.02

    def site(self, site_id: int) -> QubitSite:
        return self.sites[site_id]

    def features(self) -> np.ndarray:
        """Raw (row, col) coordinates, shape (441, 2)."""
        return np.array([(s.row, s.col) for s in self.sites], dtype=float)

    def labels(self) -> np.ndarray:
        return np.array([s.true_class for s in self.sites], dtype=int)

    def cos_alphas(self) -> np.ndarray:
        return np.array([s.cos_alpha for s in self.sites], dtype=float)


@dataclass(frozen=True)
class FeatureStats:
    """Per-feature mean and sample standard deviation (divisor N-1)."""

    mean: tuple[float, ...]
    std: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.mean)


@dataclass(frozen=True)
class MeasurementConfig:
    """How Bob labels one qubit: ancilla spread, ensemble size, measurement kind."""

    sigma: float = 10.0              # ancilla position std, units of the eigenvalues a_j = +-1
    n_copies: int = 500
    kind: str = WEAK                 # "weak" | "strong"

    def __post_init__(self):
        if self.kind not in MEASUREMENT_KINDS:
            raise ParameterError(f"Unknown measurement kind '{self.kind}'")
        if not self.sigma > 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")
        if int(self.n_copies) != self.n_copies or self.n_copies < 1:
            raise ParameterError(f"n_copies must be an integer >= 1, got {self.n_copies}")
        if self.kind == WEAK and self.sigma < WEAK_REGIME_SIGMA:
            logger.warning(
                f"sigma={self.sigma} < {WEAK_REGIME_SIGMA}: outside the weak regime, "
                "readings disturb the qubit strongly"
            )


@dataclass(frozen=True)
class MeasurementRecord:
    """One labeling event: n readings on n copies of a single qubit."""

    site_id: int
    kind: str
    readings: tuple[float, ...]      # weak: ancilla positions q0; strong: outcomes +1/-1
    post_angles: tuple[float, ...]
    copy_fidelities: tuple[float, ...]
    min_fidelity: float
    estimated_label: int


@dataclass(frozen=True)
class Posterior:
    """Binary class probabilities."""

    p0: float
    p1: float

    def __post_init__(self):
        if not (self.p0 >= 0.0 and self.p1 >= 0.0):
            raise ParameterError(f"Posterior probabilities must be >= 0: ({self.p0}, {self.p1})")
        if abs(self.p0 + self.p1 - 1.0) > POSTERIOR_TOLERANCE:
            raise ParameterError(f"Posterior must sum to 1, got {self.p0} + {self.p1}")

    @classmethod
    def from_p0(cls, p0: float) -> 'Posterior':
        return cls(p0=p0, p1=1.0 - p0)

    def as_tuple(self) -> tuple[float, float]:
        return (self.p0, self.p1)


@dataclass(frozen=True)
class TrainedModel:
    """One fitted classifier.

    parameters holds SvmParameters, TreeParameters or DiscriminantParameters
    depending on kind. constant_class is set when training saw a single class.
    """

    kind: str
    parameters: Any
    standardizer: FeatureStats
    constant_class: Optional[int] = None
    n_train: int = 0


@dataclass(frozen=True)
class QueryDecision:
    """Chosen candidate plus the scores that justified it."""

    site_id: int
    scores: dict[int, float]
    tie_set: tuple[int, ...]


@dataclass(frozen=True)
class EpisodeConfig:
    """One seeded active-learning run."""

    strategy: str
    measurement: MeasurementConfig = field(default_factory=MeasurementConfig)
    seed_oracles: Optional[int] = None   # None: 3 for usamp/random, 5 for qbc
    label_budget: Optional[int] = 22
    fidelity_threshold: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ParameterError(f"Unknown strategy '{self.strategy}'")
        if self.seed_oracles is not None and self.seed_oracles < 2:
            raise ParameterError(f"seed_oracles must be >= 2, got {self.seed_oracles}")
        if self.label_budget is None and self.fidelity_threshold is None:
            raise ParameterError("Either label_budget or fidelity_threshold must be set")
        if self.label_budget is not None and self.label_budget < 0:
            raise ParameterError(f"label_budget must be >= 0, got {self.label_budget}")
        if self.fidelity_threshold is not None and not 0.0 < self.fidelity_threshold <= 1.0:
            raise ParameterError(
                f"fidelity_threshold must lie in (0, 1], got {self.fidelity_threshold}"
            )
        if self.seed < 0:
            raise ParameterError(f"seed must be non-negative, got {self.seed}")

    @property
    def oracle_count(self) -> int:
        if self.seed_oracles is not None:
            return self.seed_oracles
        return 5 if self.strategy in QBC_STRATEGIES else 3


@dataclass(frozen=True)
class TrajectoryPoint:
    """State after a retrain."""

    labels_used: int
    accuracy: float
    system_fidelity: float
    boundary: Optional[tuple[float, float, float]] = None  # a*row + b*col + c = 0


@dataclass(frozen=True)
class QueryRecord:
    """A site Bob measured during an episode."""

    site_id: int
    estimated_label: int
    true_label: int
    min_fidelity: float


@dataclass(frozen=True)
class EpisodeResult:
    """Accuracy/fidelity trajectory of one seeded run."""

    trajectory: tuple[TrajectoryPoint, ...]
    final_model: str
    mislabel_count: int
    queries: tuple[QueryRecord, ...] = ()
    oracle_sites: tuple[int, ...] = ()
    stop_reason: str = "budget"      # "budget" | "threshold" | "exhausted"

    @property
    def labels_used(self) -> int:
        return self.trajectory[-1].labels_used

    @property
    def final_accuracy(self) -> float:
        return self.trajectory[-1].accuracy

    @property
    def final_fidelity(self) -> float:
        return self.trajectory[-1].system_fidelity


@dataclass(frozen=True)
class AggregateCurve:
    """Mean accuracy per label count with two-sided 0.95 Student-t half-widths."""

    labels: tuple[int, ...]
    mean_accuracy: tuple[float, ...]
    half_width: tuple[Optional[float], ...]  # None when replications < 2
    replications: int
    mean_fidelity: tuple[float, ...] = ()
    truncated: bool = False

    def ci(self, index: int) -> tuple[Optional[float], Optional[float]]:
        hw = self.half_width[index]
        if hw is None:
            return (None, None)
        mean = self.mean_accuracy[index]
        return (mean - hw, mean + hw)


@dataclass(frozen=True)
class StrategyCurve:
    """One (strategy, n) cell of the strategy sweep."""

    strategy: str
    n: int
    sigma: float
    curve: AggregateCurve
    mean_mislabels: float = 0.0
    mean_final_accuracy: float = 0.0


@dataclass(frozen=True)
class ThresholdCell:
    """One (threshold, kind, n) cell of the threshold sweep."""

    threshold: float
    kind: str
    n: int
    mean_labels: float
    labels_half_width: Optional[float]
    mean_accuracy: float
    accuracy_half_width: Optional[float]
    replications: int

    def accuracy_ci(self) -> tuple[Optional[float], Optional[float]]:
        if self.accuracy_half_width is None:
            return (None, None)
        return (self.mean_accuracy - self.accuracy_half_width,
                self.mean_accuracy + self.accuracy_half_width)

    def labels_ci(self) -> tuple[Optional[float], Optional[float]]:
        if self.labels_half_width is None:
            return (None, None)
        return (self.mean_labels - self.labels_half_width,
                self.mean_labels + self.labels_half_width)


@dataclass(frozen=True)
class RunConfig:
    """Resolved command-line configuration.

    Optional sweep fields left as None mean "the experiment's default sweep".
    """

    experiment: str = "figure2"
    strategy: Optional[str] = None
    measurement: Optional[str] = None
    sigma: float = 10.0
    n: Optional[tuple[int, ...]] = None
    budget: Optional[int] = None
    threshold: Optional[float] = None
    seed_oracles: Optional[int] = None
    replications: int = 100
    seed: int = 0
    out: Path = Path("results")
    plot: bool = False
    ramp_width: float = 6.0
    epsilon: float = 0.02
    workers: int = 1
    log_level: str = "INFO"
