"""Engine service: seeded active-learning episodes, aggregation and experiment sweeps."""

import functools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from src.adapters.quantum_measurement import (
    SINGLE_SHOT_STREAM,
    measure_ensemble,
    measurement_rng,
    sample_weak,
    system_fidelity,
)
from src.core.exceptions import ParameterError
from src.core.lattice import DEFAULT_EPSILON, DEFAULT_RAMP_WIDTH, generate_lattice
from src.core.types import (
    NUM_SITES,
    QBC_VE,
    RANDOM,
    STRONG,
    USAMP_LC,
    WEAK,
    AggregateCurve,
    EpisodeConfig,
    EpisodeResult,
    LatticeState,
    MeasurementConfig,
    MeasurementRecord,
    QueryRecord,
    StrategyCurve,
    ThresholdCell,
    TrajectoryPoint,
)
from src.models.classifiers import dump_model, linear_boundary, predict_many, train
from src.services.strategy_service import Committee, committee_kinds, select_candidate

logger = logging.getLogger("qalretrieve")

DEFAULT_STRATEGIES = (RANDOM, USAMP_LC, QBC_VE)
DEFAULT_N_VALUES = (5, 50, 100, 500)
DEFAULT_THRESHOLDS = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99)
DEFAULT_KINDS = (WEAK, STRONG)
DEFAULT_SIGMA = 10.0
DEFAULT_N = 500
DEFAULT_BUDGET = 22
DEFAULT_THRESHOLD_BUDGET = 100
DEFAULT_REPLICATIONS = 100
CONFIDENCE = 0.95

PER_REPLICATION = "per_replication"
FIXED = "fixed"
LATTICE_POLICIES = (PER_REPLICATION, FIXED)

# spawn keys for derived seeds
_LATTICE_KEY = 0
_EPISODE_KEY = 1

STOP_BUDGET = "budget"
STOP_THRESHOLD = "threshold"
STOP_EXHAUSTED = "exhausted"


def derive_seed(master_seed: int, *keys: int) -> int:
    """Deterministic child seed of (master_seed, keys)."""
    sequence = np.random.SeedSequence(entropy=master_seed, spawn_key=keys)
    return int(sequence.generate_state(1, dtype=np.uint32)[0])


def draw_oracles(lattice: LatticeState, count: int, rng: np.random.Generator) -> list[int]:
    """Alice's perfectly labeled seeds: uniform without replacement, both classes present."""
    if not 2 <= count <= NUM_SITES:
        raise ParameterError(f"Oracle count must lie in [2, {NUM_SITES}], got {count}")
    labels = lattice.labels()
    while True:
        sites = rng.choice(NUM_SITES, size=count, replace=False)
        if np.unique(labels[sites]).size == 2:
            return [int(s) for s in sites]


def train_committee(kinds: Sequence[str], training: Sequence[tuple[np.ndarray, int]]) -> Committee:
    return Committee(members=tuple(train(kind, training) for kind in kinds))


def _trajectory_point(labels_used: int, committee: Committee, features: np.ndarray,
                      truth: np.ndarray, fidelity: float) -> TrajectoryPoint:
    model = committee.svm_member()
    accuracy = float(np.mean(predict_many(model, features) == truth))
    return TrajectoryPoint(labels_used=labels_used, accuracy=accuracy,
                           system_fidelity=fidelity, boundary=linear_boundary(model))


def run_episode(lattice: LatticeState, config: EpisodeConfig) -> EpisodeResult:
    """One seeded active-learning run.

    Alice's oracles are labeled perfectly at no fidelity cost. Each iteration
    selects an unqueried site, measures its ensemble, appends Bob's estimated
    label verbatim (right or wrong), retrains and records accuracy of the
    tracked linear SVM over all 441 sites. Stops at label_budget, when the
    system fidelity falls below fidelity_threshold (that label is kept), or
    when no candidates remain.
    """
    rng = np.random.default_rng(config.seed)
    features = lattice.features()
    truth = lattice.labels()
    kinds = committee_kinds(config.strategy)

    oracle_sites = draw_oracles(lattice, config.oracle_count, rng)
    training = [(features[s], int(truth[s])) for s in oracle_sites]
    labeled = set(oracle_sites)
    committee = train_committee(kinds, training)

    records: list[MeasurementRecord] = []
    queries: list[QueryRecord] = []
    trajectory = [_trajectory_point(0, committee, features, truth, 1.0)]
    stop_reason = STOP_BUDGET

    while True:
        if config.label_budget is not None and len(queries) >= config.label_budget:
            stop_reason = STOP_BUDGET
            break
        unlabeled = {s: features[s] for s in range(NUM_SITES) if s not in labeled}
        if not unlabeled:
            stop_reason = STOP_EXHAUSTED
            break

        decision = select_candidate(config.strategy, committee, unlabeled, rng)
        site = lattice.site(decision.site_id)
        record = measure_ensemble(site, config.measurement,
                                  measurement_rng(config.seed, site.site_id))
        records.append(record)
        labeled.add(site.site_id)
        training.append((features[site.site_id], record.estimated_label))
        queries.append(QueryRecord(
            site_id=site.site_id,
            estimated_label=record.estimated_label,
            true_label=site.true_class,
            min_fidelity=record.min_fidelity,
        ))

        fidelity = system_fidelity(records)
        committee = train_committee(kinds, training)
        trajectory.append(_trajectory_point(len(queries), committee, features, truth, fidelity))

        if config.fidelity_threshold is not None and fidelity < config.fidelity_threshold:
            stop_reason = STOP_THRESHOLD
            break

    mislabels = sum(1 for q in queries if q.estimated_label != q.true_label)
    logger.debug(f"Episode {config.strategy} seed={config.seed} stopped by {stop_reason} "
                 f"after {len(queries)} labels, accuracy={trajectory[-1].accuracy:.3f}")
    return EpisodeResult(
        trajectory=tuple(trajectory),
        final_model=dump_model(committee.svm_member()),
        mislabel_count=mislabels,
        queries=tuple(queries),
        oracle_sites=tuple(oracle_sites),
        stop_reason=stop_reason,
    )


def t_half_width(values: Sequence[float], confidence: float = CONFIDENCE) -> Optional[float]:
    """Two-sided Student-t half-width of the mean; None for fewer than 2 values."""
    data = np.asarray(values, dtype=float)
    if data.size < 2:
        return None
    if np.all(data == data[0]):
        return 0.0
    sem = data.std(ddof=1) / np.sqrt(data.size)
    return float(stats.t.ppf((1.0 + confidence) / 2.0, data.size - 1) * sem)


def aggregate(replications: Sequence[EpisodeResult]) -> AggregateCurve:
    """Mean accuracy and 0.95 CI per label count over aligned trajectories.

    Trajectories of different lengths are cut to the common prefix and the
    curve is flagged as truncated.
    """
    if not replications:
        raise ParameterError("aggregate needs at least one replication")
    length = min(len(r.trajectory) for r in replications)
    truncated = any(len(r.trajectory) != length for r in replications)
    if truncated:
        logger.warning(f"Trajectories differ in length; aggregating the first {length} points")

    labels = tuple(p.labels_used for p in replications[0].trajectory[:length])
    accuracy = np.array([[p.accuracy for p in r.trajectory[:length]] for r in replications])
    fidelity = np.array([[p.system_fidelity for p in r.trajectory[:length]] for r in replications])
    return AggregateCurve(
        labels=labels,
        mean_accuracy=tuple(float(v) for v in accuracy.mean(axis=0)),
        half_width=tuple(t_half_width(accuracy[:, k]) for k in range(length)),
        replications=len(replications),
        mean_fidelity=tuple(float(v) for v in fidelity.mean(axis=0)),
        truncated=truncated,
    )


@functools.lru_cache(maxsize=256)
def _cached_lattice(seed: int, ramp_width: float, epsilon: float) -> LatticeState:
    return generate_lattice(seed, ramp_width, epsilon)


@dataclass(frozen=True)
class _EpisodeTask:
    lattice_seed: int
    ramp_width: float
    epsilon: float
    config: EpisodeConfig


def _run_task(task: _EpisodeTask) -> EpisodeResult:
    lattice = _cached_lattice(task.lattice_seed, task.ramp_width, task.epsilon)
    return run_episode(lattice, task.config)


def run_replications(tasks: Sequence[_EpisodeTask], workers: int = 1) -> list[EpisodeResult]:
    """Run tasks in order; with workers > 1 in a process pool, results still in task order."""
    if workers <= 1 or len(tasks) < 2:
        return [_run_task(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _lattice_seed(master_seed: int, replication: int, policy: str) -> int:
    if policy == FIXED:
        return derive_seed(master_seed, _LATTICE_KEY)
    return derive_seed(master_seed, _LATTICE_KEY, replication)


def _check_sweep(replications: int, lattice_policy: str) -> None:
    if replications < 2:
        raise ParameterError(f"Sweeps need at least 2 replications, got {replications}")
    if lattice_policy not in LATTICE_POLICIES:
        raise ParameterError(f"Unknown lattice policy '{lattice_policy}'")


def experiment_strategy_sweep(
    strategies: Sequence[str] = DEFAULT_STRATEGIES,
    n_values: Sequence[int] = DEFAULT_N_VALUES,
    sigma: float = DEFAULT_SIGMA,
    budget: int = DEFAULT_BUDGET,
    replications: int = DEFAULT_REPLICATIONS,
    master_seed: int = 0,
    kind: str = WEAK,
    lattice_policy: str = PER_REPLICATION,
    ramp_width: float = DEFAULT_RAMP_WIDTH,
    epsilon: float = DEFAULT_EPSILON,
    workers: int = 1,
    seed_oracles: Optional[int] = None,
) -> list[StrategyCurve]:
    """Accuracy-vs-labels curves for every (strategy, n).

    Replication r uses the same lattice and episode seed for every strategy and
    n, so curves differ only through the strategy and the ensemble size.
    """
    _check_sweep(replications, lattice_policy)
    curves = []
    for strategy in strategies:
        for n in n_values:
            measurement = MeasurementConfig(sigma=sigma, n_copies=n, kind=kind)
            tasks = [
                _EpisodeTask(
                    lattice_seed=_lattice_seed(master_seed, r, lattice_policy),
                    ramp_width=ramp_width,
                    epsilon=epsilon,
                    config=EpisodeConfig(strategy=strategy, measurement=measurement,
                                         seed_oracles=seed_oracles, label_budget=budget,
                                         seed=derive_seed(master_seed, _EPISODE_KEY, r)),
                )
                for r in range(replications)
            ]
            results = run_replications(tasks, workers)
            curve = aggregate(results)
            curves.append(StrategyCurve(
                strategy=strategy,
                n=n,
                sigma=sigma,
                curve=curve,
                mean_mislabels=float(np.mean([r.mislabel_count for r in results])),
                mean_final_accuracy=float(np.mean([r.final_accuracy for r in results])),
            ))
            logger.info(f"strategy={strategy} n={n}: accuracy {curve.mean_accuracy[-1]:.3f} "
                        f"at {curve.labels[-1]} labels over {replications} replications")
    return curves


def experiment_threshold_sweep(
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    kinds: Sequence[str] = DEFAULT_KINDS,
    sigma: float = DEFAULT_SIGMA,
    n_values: Sequence[int] = (DEFAULT_N,),
    replications: int = DEFAULT_REPLICATIONS,
    master_seed: int = 0,
    strategy: str = USAMP_LC,
    budget: int = DEFAULT_THRESHOLD_BUDGET,
    lattice_policy: str = PER_REPLICATION,
    ramp_width: float = DEFAULT_RAMP_WIDTH,
    epsilon: float = DEFAULT_EPSILON,
    workers: int = 1,
    seed_oracles: Optional[int] = None,
) -> list[ThresholdCell]:
    """Labels acquired and final accuracy when measuring until the fidelity threshold."""
    _check_sweep(replications, lattice_policy)
    for threshold in thresholds:
        if not 0.0 < threshold < 1.0:
            raise ParameterError(f"Thresholds must lie in (0, 1), got {threshold}")

    cells = []
    for threshold in thresholds:
        for kind in kinds:
            for n in n_values:
                measurement = MeasurementConfig(sigma=sigma, n_copies=n, kind=kind)
                tasks = [
                    _EpisodeTask(
                        lattice_seed=_lattice_seed(master_seed, r, lattice_policy),
                        ramp_width=ramp_width,
                        epsilon=epsilon,
                        config=EpisodeConfig(strategy=strategy, measurement=measurement,
                                             seed_oracles=seed_oracles, label_budget=budget,
                                             fidelity_threshold=threshold,
                                             seed=derive_seed(master_seed, _EPISODE_KEY, r)),
                    )
                    for r in range(replications)
                ]
                results = run_replications(tasks, workers)
                labels = [float(r.labels_used) for r in results]
                accuracy = [r.final_accuracy for r in results]
                cell = ThresholdCell(
                    threshold=threshold,
                    kind=kind,
                    n=n,
                    mean_labels=float(np.mean(labels)),
                    labels_half_width=t_half_width(labels),
                    mean_accuracy=float(np.mean(accuracy)),
                    accuracy_half_width=t_half_width(accuracy),
                    replications=replications,
                )
                cells.append(cell)
                logger.info(f"threshold={threshold} kind={kind} n={n}: "
                            f"{cell.mean_labels:.2f} labels, accuracy {cell.mean_accuracy:.3f}")
    return cells


@dataclass(frozen=True)
class Figure1Result:
    """Lattice, single-shot weak readings and one traced episode per strategy."""

    lattice: LatticeState
    weak_values: tuple[float, ...]   # one reading per site, row-major
    episodes: dict[str, EpisodeResult]


def single_shot_weak_values(lattice: LatticeState, sigma: float, seed: int) -> tuple[float, ...]:
    """One weak reading per qubit, each from its own derived stream."""
    return tuple(
        sample_weak(site.alpha, sigma, measurement_rng(seed, site.site_id, SINGLE_SHOT_STREAM))[0]
        for site in lattice.sites
    )


def experiment_figure1(
    strategies: Sequence[str] = (USAMP_LC, QBC_VE),
    sigma: float = DEFAULT_SIGMA,
    n: int = DEFAULT_N,
    budget: int = DEFAULT_BUDGET,
    kind: str = WEAK,
    master_seed: int = 0,
    ramp_width: float = DEFAULT_RAMP_WIDTH,
    epsilon: float = DEFAULT_EPSILON,
    seed_oracles: Optional[int] = None,
) -> Figure1Result:
    """Lattice, weak-value map and traced episodes on a single lattice."""
    lattice = generate_lattice(derive_seed(master_seed, _LATTICE_KEY), ramp_width, epsilon)
    episode_seed = derive_seed(master_seed, _EPISODE_KEY)
    measurement = MeasurementConfig(sigma=sigma, n_copies=n, kind=kind)
    episodes = {
        strategy: run_episode(lattice, EpisodeConfig(strategy=strategy, measurement=measurement,
                                                     seed_oracles=seed_oracles,
                                                     label_budget=budget, seed=episode_seed))
        for strategy in strategies
    }
    return Figure1Result(
        lattice=lattice,
        weak_values=single_shot_weak_values(lattice, sigma, episode_seed),
        episodes=episodes,
    )
