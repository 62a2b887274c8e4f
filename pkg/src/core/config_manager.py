"""Run configuration: defaults, YAML config file, QAL_OUT and command-line flags."""

import argparse
import logging
import os
import threading
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import yaml

from src.core.exceptions import UsageError
from src.core.types import EXPERIMENTS, MEASUREMENT_KINDS, NUM_SITES, STRATEGIES, RunConfig

logger = logging.getLogger("qalretrieve")

OUT_ENV_VAR = "QAL_OUT"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# Keys mirror the CLI flag names. None means "the experiment's default sweep".
DEFAULT_CONFIG = {
    "experiment": "figure2",
    "strategy": None,
    "measurement": None,
    "sigma": 10.0,
    "n": None,
    "budget": None,
    "threshold": None,
    "seed_oracles": None,
    "replications": 100,
    "seed": 0,
    "out": "results",
    "plot": False,
    "ramp_width": 6.0,
    "epsilon": 0.02,
    "workers": 1,
    "log_level": "INFO",
}

# Experiments that aggregate replications into confidence intervals.
_SWEEP_EXPERIMENTS = ("figure2", "figure3")


def _to_int(key: str, value: Any) -> int:
    if isinstance(value, bool):
        raise UsageError(f"{key}: expected an integer, got {value!r}")
    try:
        if isinstance(value, float):
            if not value.is_integer():
                raise ValueError(value)
            return int(value)
        return int(str(value).strip())
    except (TypeError, ValueError, OverflowError):
        raise UsageError(f"{key}: expected an integer, got {value!r}")


def _to_int_list(key: str, value: Any) -> tuple[int, ...]:
    """One integer, a comma-separated string or a YAML list; order kept."""
    if isinstance(value, str):
        items = [item for item in value.split(",") if item.strip()]
    elif isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [value]
    numbers = tuple(_to_int(key, item) for item in items)
    if not numbers:
        raise UsageError(f"{key}: expected at least one integer, got {value!r}")
    if len(set(numbers)) != len(numbers):
        raise UsageError(f"{key}: duplicate values in {value!r}")
    return numbers


def _to_float(key: str, value: Any) -> float:
    if isinstance(value, bool):
        raise UsageError(f"{key}: expected a number, got {value!r}")
    try:
        number = float(value)
    except (TypeError, ValueError):
        raise UsageError(f"{key}: expected a number, got {value!r}")
    if number != number or number in (float("inf"), float("-inf")):
        raise UsageError(f"{key}: expected a finite number, got {value!r}")
    return number


def _to_bool(key: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("true", "yes", "on", "1"):
        return True
    if text in ("false", "no", "off", "0"):
        return False
    raise UsageError(f"{key}: expected true or false, got {value!r}")


def _choice(choices: Sequence[str]) -> Callable[[str, Any], str]:
    def check(key: str, value: Any) -> str:
        if value not in choices:
            raise UsageError(f"{key}: '{value}' is not one of {', '.join(choices)}")
        return value
    return check


def _ranged(convert: Callable[[str, Any], Any], accept: Callable[[Any], bool],
            rule: str) -> Callable[[str, Any], Any]:
    def check(key: str, value: Any) -> Any:
        converted = convert(key, value)
        if not accept(converted):
            raise UsageError(f"{key}: {value!r} out of range, must be {rule}")
        return converted
    return check


def _out_dir(key: str, value: Any) -> str:
    if not str(value).strip():
        raise UsageError(f"{key}: output directory must not be empty")
    return str(value)


_VALIDATORS: dict[str, Callable[[str, Any], Any]] = {
    "experiment": _choice(EXPERIMENTS),
    "strategy": _choice(STRATEGIES),
    "measurement": _choice(MEASUREMENT_KINDS),
    "sigma": _ranged(_to_float, lambda v: v > 0.0, "> 0"),
    "n": _ranged(_to_int_list, lambda v: min(v) >= 1, ">= 1"),
    "budget": _ranged(_to_int, lambda v: v >= 0, ">= 0"),
    "threshold": _ranged(_to_float, lambda v: 0.0 < v < 1.0, "in (0, 1)"),
    "seed_oracles": _ranged(_to_int, lambda v: 2 <= v <= NUM_SITES, f"in [2, {NUM_SITES}]"),
    "replications": _ranged(_to_int, lambda v: v >= 1, ">= 1"),
    "seed": _ranged(_to_int, lambda v: v >= 0, ">= 0"),
    "out": _out_dir,
    "plot": _to_bool,
    "ramp_width": _ranged(_to_float, lambda v: v > 0.0, "> 0"),
    "epsilon": _ranged(_to_float, lambda v: 0.0 < v < 0.1, "in (0, 0.1)"),
    "workers": _ranged(_to_int, lambda v: v >= 1, ">= 1"),
    "log_level": _choice(LOG_LEVELS),
}


class ConfigManager:
    """Layered run configuration.

    Starts from DEFAULT_CONFIG; load_file() and update() overlay validated
    values. Keys accept '-' or '_' (config files may use the flag spelling).
    """

    def __init__(self):
        self._config = self._deep_copy(DEFAULT_CONFIG)
        self._lock = threading.RLock()

    @staticmethod
    def normalize_key(key: str) -> str:
        return key.strip().lstrip("-").replace("-", "_")

    def get(self, key: str, default=None) -> Any:
        with self._lock:
            return self._config.get(self.normalize_key(key), default)

    def set(self, key: str, value: Any) -> None:
        """Validate and store one value.

        Raises:
            UsageError: unknown key or invalid value
        """
        name = self.normalize_key(key)
        validated = self._validate_key_value(name, value)
        with self._lock:
            self._config[name] = validated

    def update(self, changes: dict) -> None:
        """Validate every change first, then apply them together."""
        validated = {}
        for key, value in changes.items():
            name = self.normalize_key(key)
            validated[name] = self._validate_key_value(name, value)
        with self._lock:
            self._config.update(validated)

    def load_file(self, path: Path) -> None:
        """Overlay a YAML config file: a flat mapping of flag names to values.

        Raises:
            UsageError: unreadable file, malformed YAML, non-mapping document,
                unknown key or invalid value
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f)
        except OSError as e:
            raise UsageError(f"Cannot read config file {path}: {e}")
        except yaml.YAMLError as e:
            raise UsageError(f"Malformed config file {path}: {e}")

        if data is None:
            logger.warning(f"Config file {path} is empty; nothing to apply")
            return
        if not isinstance(data, dict):
            raise UsageError(f"Config file {path} must be a mapping of key: value")
        self.update({str(k): v for k, v in data.items()})
        logger.debug(f"Loaded configuration from {path}")

    def as_dict(self) -> dict:
        with self._lock:
            return self._deep_copy(self._config)

    def to_run_config(self) -> RunConfig:
        """Freeze the current values, checking cross-field rules.

        Raises:
            UsageError: a sweep experiment with fewer than 2 replications,
                or figure1 with more than one n
        """
        values = self.as_dict()
        if values["experiment"] in _SWEEP_EXPERIMENTS and values["replications"] < 2:
            raise UsageError(
                f"{values['experiment']} needs at least 2 replications for confidence intervals"
            )
        if values["experiment"] == "figure1" and values["n"] is not None and len(values["n"]) > 1:
            raise UsageError("figure1 traces a single ensemble size; give one n")
        values["out"] = Path(values["out"])
        return RunConfig(**values)

    def _validate_key_value(self, key: str, value: Any) -> Any:
        """Return the converted value.

        None is accepted for keys whose default is None (unset sweep fields).

        Raises:
            UsageError: unknown key or invalid value
        """
        if key not in _VALIDATORS:
            raise UsageError(f"Unknown configuration key '{key}'")
        if value is None:
            if DEFAULT_CONFIG[key] is None:
                return None
            raise UsageError(f"{key}: a value is required")
        return _VALIDATORS[key](key, value)

    @staticmethod
    def _deep_copy(obj):
        if isinstance(obj, dict):
            return {k: ConfigManager._deep_copy(v) for k, v in obj.items()}
        elif isinstance(obj, list):
            return [ConfigManager._deep_copy(item) for item in obj]
        else:
            return obj


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="qalretrieve",
        description="Active learning of a qubit lattice with weak and strong measurements.",
    )
    # Defaults stay None so only flags actually given override the config file.
    parser.add_argument("--experiment", help="figure1, figure2 or figure3 (default figure2)")
    parser.add_argument("--strategy", help="random, usamp_lc, usamp_margin, usamp_entropy, "
                                           "qbc_ve or qbc_kl (default: the experiment's sweep)")
    parser.add_argument("--measurement", help="weak or strong (default: the experiment's sweep)")
    parser.add_argument("--sigma", help="ancilla spread (default 10)")
    parser.add_argument("--n", help="copies per labeled qubit, comma-separated for a sweep "
                                     "(default: the experiment's sweep)")
    parser.add_argument("--budget", help="labels per episode (default 22, figure3: 100)")
    parser.add_argument("--threshold", help="fidelity threshold in (0, 1) for figure3")
    parser.add_argument("--seed-oracles", dest="seed_oracles",
                        help="Alice's labeled seed sites (default 3, committees 5)")
    parser.add_argument("--replications", help="episodes per curve (default 100)")
    parser.add_argument("--seed", help="master seed (default 0)")
    parser.add_argument("--out", help=f"output directory (default ${OUT_ENV_VAR} or results)")
    parser.add_argument("--plot", action="store_const", const=True, default=None,
                        help="also render SVG plots")
    parser.add_argument("--config", help="YAML config file with the same keys as the flags")
    parser.add_argument("--ramp-width", dest="ramp_width", help="lattice ramp width (default 6)")
    parser.add_argument("--epsilon", help="offset of cos(alpha) from 0 (default 0.02)")
    parser.add_argument("--workers", help="worker processes for replications (default 1)")
    parser.add_argument("--log-level", dest="log_level", help="DEBUG, INFO, WARNING or ERROR")
    return parser


def parse_config(args: Optional[Sequence[str]] = None, file: Optional[Path] = None) -> RunConfig:
    """Resolve a RunConfig: flag > config file > QAL_OUT (out only) > default.

    A --config flag takes the place of file.

    Raises:
        UsageError: unknown flag, unreadable config file or out-of-range value
    """
    namespace = build_parser().parse_args(list(args) if args is not None else [])
    flags = {key: value for key, value in vars(namespace).items()
             if key != "config" and value is not None}

    manager = ConfigManager()
    env_out = os.environ.get(OUT_ENV_VAR)
    if env_out:
        manager.set("out", env_out)

    config_path = namespace.config or file
    if config_path is not None:
        manager.load_file(Path(config_path))

    manager.update(flags)
    return manager.to_run_config()
