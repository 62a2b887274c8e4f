"""Harness service: experiment dispatch, CSV/SVG emission and exit statuses."""

import logging
import sys
from pathlib import Path
from typing import Optional, TextIO

from src.adapters.csv_writer import (
    EPISODE_TRACE,
    LATTICE,
    STRATEGY_SWEEP,
    THRESHOLD_SWEEP,
    THRESHOLD_TRADEOFF,
    WEAK_VALUES,
    emit_csv,
)
from src.adapters.svg_plotter import CURVES, HEATMAP, emit_plot
from src.core.exceptions import ConfigError, ParameterError, QalRetrieveError
from src.core.lattice import lattice_rows
from src.core.types import (
    QBC_VE,
    USAMP_LC,
    WEAK,
    RunConfig,
    StrategyCurve,
    ThresholdCell,
    TrajectoryPoint,
)
from src.services.engine_service import (
    DEFAULT_BUDGET,
    DEFAULT_KINDS,
    DEFAULT_N,
    DEFAULT_N_VALUES,
    DEFAULT_STRATEGIES,
    DEFAULT_THRESHOLD_BUDGET,
    DEFAULT_THRESHOLDS,
    Figure1Result,
    experiment_figure1,
    experiment_strategy_sweep,
    experiment_threshold_sweep,
)

logger = logging.getLogger("qalretrieve")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

FIGURE1_STRATEGIES = (USAMP_LC, QBC_VE)

# episode_trace.csv events
INITIAL = "initial"
ORACLE = "oracle"
QUERY = "query"


def _or_default(value, default):
    return default if value is None else value


def strategy_sweep_rows(curves: list[StrategyCurve]) -> list[tuple]:
    """One row per (strategy, n, label count)."""
    rows = []
    for item in curves:
        curve = item.curve
        for index, labels in enumerate(curve.labels):
            low, high = curve.ci(index)
            rows.append((item.strategy, item.n, item.sigma, labels,
                         curve.mean_accuracy[index], low, high, curve.replications))
    return rows


def threshold_sweep_rows(cells: list[ThresholdCell]) -> list[tuple]:
    return [(c.threshold, c.kind, c.mean_labels, c.mean_accuracy, *c.accuracy_ci(), c.replications)
            for c in cells]


def threshold_tradeoff_rows(cells: list[ThresholdCell]) -> list[tuple]:
    return [(c.threshold, c.kind, c.n, c.mean_labels, *c.labels_ci(),
             c.mean_accuracy, *c.accuracy_ci(), c.replications)
            for c in cells]


def _boundary(point: TrajectoryPoint) -> tuple:
    return point.boundary if point.boundary is not None else (None, None, None)


def episode_trace_rows(result: Figure1Result) -> list[tuple]:
    """Trace rows of every episode.

    Step 0 holds one "initial" row with the oracle-only model and one "oracle"
    row per seed site. Step k >= 1 is the k-th query.
    """
    rows = []
    for strategy, episode in result.episodes.items():
        start = episode.trajectory[0]
        rows.append((strategy, 0, INITIAL, None, None, None, None, None, None,
                     start.accuracy, start.system_fidelity, *_boundary(start)))
        for site_id in episode.oracle_sites:
            site = result.lattice.site(site_id)
            rows.append((strategy, 0, ORACLE, site_id, site.row, site.col,
                         site.true_class, site.true_class, 1.0,
                         start.accuracy, start.system_fidelity, None, None, None))
        for step, query in enumerate(episode.queries, start=1):
            point = episode.trajectory[step]
            site = result.lattice.site(query.site_id)
            rows.append((strategy, step, QUERY, query.site_id, site.row, site.col,
                         query.estimated_label, query.true_label, query.min_fidelity,
                         point.accuracy, point.system_fidelity, *_boundary(point)))
    return rows


class HarnessService:
    """Runs one configured experiment and writes its artifacts to config.out."""

    def __init__(self, config: RunConfig, stdout: Optional[TextIO] = None):
        self._config = config
        self._stdout = stdout if stdout is not None else sys.stdout

    def _say(self, line: str) -> None:
        print(line, file=self._stdout)

    def run(self) -> list[Path]:
        """Dispatch on config.experiment and return the written files."""
        experiment = self._config.experiment
        logger.info(f"Starting {experiment} (seed={self._config.seed}, out={self._config.out})")
        if experiment == "figure1":
            paths = self.run_figure1()
        elif experiment == "figure2":
            paths = self.run_figure2()
        else:
            paths = self.run_figure3()
        logger.info(f"Finished {experiment}: {len(paths)} files written")
        return paths

    def run_figure1(self) -> list[Path]:
        cfg = self._config
        strategies = (cfg.strategy,) if cfg.strategy else FIGURE1_STRATEGIES
        result = experiment_figure1(
            strategies=strategies,
            sigma=cfg.sigma,
            n=cfg.n[0] if cfg.n else DEFAULT_N,
            budget=_or_default(cfg.budget, DEFAULT_BUDGET),
            kind=cfg.measurement or WEAK,
            master_seed=cfg.seed,
            ramp_width=cfg.ramp_width,
            epsilon=cfg.epsilon,
            seed_oracles=cfg.seed_oracles,
        )
        weak_rows = [(s.row, s.col, q0) for s, q0 in zip(result.lattice.sites, result.weak_values)]
        lattice_csv = emit_csv(LATTICE, lattice_rows(result.lattice), cfg.out)
        weak_csv = emit_csv(WEAK_VALUES, weak_rows, cfg.out)
        paths = [lattice_csv, weak_csv, emit_csv(EPISODE_TRACE, episode_trace_rows(result), cfg.out)]

        for strategy, episode in result.episodes.items():
            self._say(f"figure1 {strategy}: accuracy {episode.final_accuracy:.4f} after "
                      f"{episode.labels_used} labels, system fidelity {episode.final_fidelity:.4f}, "
                      f"{episode.mislabel_count} mislabeled")
        if cfg.plot:
            paths += [emit_plot(lattice_csv, HEATMAP), emit_plot(weak_csv, HEATMAP)]
        return paths

    def run_figure2(self) -> list[Path]:
        cfg = self._config
        if cfg.threshold is not None:
            logger.warning("figure2 runs to the label budget; threshold is ignored")
        curves = experiment_strategy_sweep(
            strategies=(cfg.strategy,) if cfg.strategy else DEFAULT_STRATEGIES,
            n_values=cfg.n or DEFAULT_N_VALUES,
            sigma=cfg.sigma,
            budget=_or_default(cfg.budget, DEFAULT_BUDGET),
            replications=cfg.replications,
            master_seed=cfg.seed,
            kind=cfg.measurement or WEAK,
            ramp_width=cfg.ramp_width,
            epsilon=cfg.epsilon,
            seed_oracles=cfg.seed_oracles,
            workers=cfg.workers,
        )
        sweep_csv = emit_csv(STRATEGY_SWEEP, strategy_sweep_rows(curves), cfg.out)
        paths = [sweep_csv]

        for item in curves:
            low, high = item.curve.ci(len(item.curve.labels) - 1)
            ci = f"[{low:.4f}, {high:.4f}]" if low is not None else "[n/a]"
            self._say(f"figure2 {item.strategy} n={item.n}: accuracy "
                      f"{item.curve.mean_accuracy[-1]:.4f} {ci} at {item.curve.labels[-1]} labels, "
                      f"{item.mean_mislabels:.2f} mislabels per episode")
        if cfg.plot:
            paths.append(emit_plot(sweep_csv, CURVES))
        return paths

    def run_figure3(self) -> list[Path]:
        cfg = self._config
        cells = experiment_threshold_sweep(
            thresholds=(cfg.threshold,) if cfg.threshold is not None else DEFAULT_THRESHOLDS,
            kinds=(cfg.measurement,) if cfg.measurement else DEFAULT_KINDS,
            sigma=cfg.sigma,
            n_values=cfg.n or (DEFAULT_N,),
            replications=cfg.replications,
            master_seed=cfg.seed,
            strategy=cfg.strategy or USAMP_LC,
            budget=_or_default(cfg.budget, DEFAULT_THRESHOLD_BUDGET),
            ramp_width=cfg.ramp_width,
            epsilon=cfg.epsilon,
            seed_oracles=cfg.seed_oracles,
            workers=cfg.workers,
        )
        sweep_csv = emit_csv(THRESHOLD_SWEEP, threshold_sweep_rows(cells), cfg.out)
        tradeoff_csv = emit_csv(THRESHOLD_TRADEOFF, threshold_tradeoff_rows(cells), cfg.out)
        paths = [sweep_csv, tradeoff_csv]

        for cell in cells:
            self._say(f"figure3 threshold={cell.threshold} {cell.kind} n={cell.n}: "
                      f"{cell.mean_labels:.2f} labels, accuracy {cell.mean_accuracy:.4f}")
        if cfg.plot:
            paths += [emit_plot(sweep_csv, CURVES), emit_plot(tradeoff_csv, CURVES)]
        return paths


def run_cli(config: RunConfig, stdout: Optional[TextIO] = None,
            stderr: Optional[TextIO] = None) -> int:
    """Run the configured experiment.

    Returns 0 on success, 1 when an artifact cannot be produced and 2 when the
    configuration is rejected while running.
    """
    try:
        HarnessService(config, stdout).run()
        return EXIT_OK
    except (ConfigError, ParameterError) as e:
        status, message = EXIT_USAGE, e.message
    except QalRetrieveError as e:
        status, message = EXIT_FAILURE, e.message
    except OSError as e:
        status, message = EXIT_FAILURE, str(e)
    logger.error(f"{config.experiment} failed: {message}")
    print(f"qalretrieve: error: {message}", file=stderr if stderr is not None else sys.stderr)
    return status
