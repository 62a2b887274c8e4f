"""Tests for ConfigManager and command-line parsing."""

from pathlib import Path

import pytest
import yaml

from src.core.config_manager import (
    DEFAULT_CONFIG,
    OUT_ENV_VAR,
    ConfigManager,
    parse_config,
)
from src.core.exceptions import ConfigError, UsageError
from src.core.types import RunConfig


@pytest.fixture(autouse=True)
def no_out_env(monkeypatch):
    monkeypatch.delenv(OUT_ENV_VAR, raising=False)


def _write_yaml(path: Path, data) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        yaml.safe_dump(data, f)
    return path


class TestConfigManager:
    """Test the layered key/value store."""

    def test_starts_from_defaults(self):
        cm = ConfigManager()
        assert cm.as_dict() == DEFAULT_CONFIG

    def test_as_dict_is_a_copy(self):
        cm = ConfigManager()
        cm.as_dict()["sigma"] = 99.0
        assert cm.get("sigma") == 10.0

    def test_instances_are_independent(self):
        first, second = ConfigManager(), ConfigManager()
        first.set("seed", 7)
        assert second.get("seed") == 0

    def test_set_converts_strings(self):
        cm = ConfigManager()
        cm.set("sigma", "2.5")
        cm.set("n", "500")
        cm.set("plot", "yes")
        assert cm.get("sigma") == 2.5
        assert cm.get("n") == (500,)
        assert cm.get("plot") is True

    def test_flag_spelling_is_accepted(self):
        cm = ConfigManager()
        cm.set("--ramp-width", 4)
        assert cm.get("ramp_width") == 4.0

    @pytest.mark.parametrize("key, value", [
        ("sigma", -1),
        ("sigma", 0),
        ("sigma", "nan"),
        ("sigma", "inf"),
        ("n", 0),
        ("n", 2.5),
        ("n", True),
        ("n", "5,0"),
        ("n", "5,5"),
        ("n", ","),
        ("n", []),
        ("seed_oracles", 1),
        ("seed_oracles", 442),
        ("budget", -1),
        ("threshold", 1.0),
        ("threshold", 0.0),
        ("replications", 0),
        ("seed", -3),
        ("epsilon", 0.1),
        ("workers", 0),
        ("strategy", "uncertainty"),
        ("measurement", "projective"),
        ("experiment", "figure4"),
        ("log_level", "TRACE"),
        ("plot", "maybe"),
        ("out", "  "),
    ])
    def test_rejects_invalid_values(self, key, value):
        with pytest.raises(UsageError):
            ConfigManager().set(key, value)

    @pytest.mark.parametrize("value, expected", [
        (50, (50,)),
        ("5, 50,500", (5, 50, 500)),
        ([100, 5], (100, 5)),
        (20.0, (20,)),
    ])
    def test_ensemble_size_lists(self, value, expected):
        cm = ConfigManager()
        cm.set("n", value)
        assert cm.get("n") == expected

    def test_seed_oracles(self):
        cm = ConfigManager()
        cm.set("seed-oracles", "2")
        assert cm.get("seed_oracles") == 2

    def test_zero_budget_is_allowed(self):
        cm = ConfigManager()
        cm.set("budget", 0)
        assert cm.get("budget") == 0

    def test_unknown_key(self):
        with pytest.raises(UsageError):
            ConfigManager().set("colour", "red")

    def test_none_only_for_sweep_fields(self):
        cm = ConfigManager()
        cm.set("strategy", None)
        assert cm.get("strategy") is None
        with pytest.raises(UsageError):
            cm.set("sigma", None)

    def test_update_is_all_or_nothing(self):
        cm = ConfigManager()
        with pytest.raises(UsageError):
            cm.update({"seed": 5, "sigma": -1})
        assert cm.get("seed") == 0

    def test_usage_error_is_a_config_error(self):
        with pytest.raises(ConfigError):
            ConfigManager().set("n", "many")


class TestLoadFile:
    """Test YAML config files."""

    def test_overlays_values(self, tmp_dir):
        path = _write_yaml(tmp_dir / "run.yaml", {"sigma": 3.0, "ramp-width": 8, "plot": True})
        cm = ConfigManager()
        cm.load_file(path)
        assert cm.get("sigma") == 3.0
        assert cm.get("ramp_width") == 8.0
        assert cm.get("plot") is True
        assert cm.get("seed") == 0

    def test_empty_file_warns(self, tmp_dir, caplog):
        path = tmp_dir / "empty.yaml"
        path.write_text("", encoding="utf-8")
        cm = ConfigManager()
        cm.load_file(path)
        assert cm.as_dict() == DEFAULT_CONFIG
        assert "empty" in caplog.text

    def test_malformed_yaml(self, tmp_dir):
        path = tmp_dir / "bad.yaml"
        path.write_text("{{invalid yaml: [", encoding="utf-8")
        with pytest.raises(UsageError):
            ConfigManager().load_file(path)

    def test_non_mapping(self, tmp_dir):
        path = _write_yaml(tmp_dir / "list.yaml", ["sigma", 3])
        with pytest.raises(UsageError):
            ConfigManager().load_file(path)

    def test_unknown_key(self, tmp_dir):
        path = _write_yaml(tmp_dir / "run.yaml", {"learning_rate": 0.1})
        with pytest.raises(UsageError):
            ConfigManager().load_file(path)

    def test_missing_file(self, tmp_dir):
        with pytest.raises(UsageError):
            ConfigManager().load_file(tmp_dir / "absent.yaml")


class TestParseConfig:
    """Test flag > config file > QAL_OUT > default resolution."""

    def test_no_flags_gives_defaults(self):
        assert parse_config([]) == RunConfig()

    def test_flags(self):
        config = parse_config(["--sigma", "10", "--n", "500", "--strategy", "usamp_lc",
                               "--budget", "22", "--experiment", "figure1"])
        assert config.sigma == 10.0
        assert config.n == (500,)
        assert config.strategy == "usamp_lc"
        assert config.budget == 22
        assert config.experiment == "figure1"
        assert config.measurement is None

    def test_plot_and_dashed_flags(self):
        config = parse_config(["--plot", "--ramp-width", "4", "--log-level", "DEBUG"])
        assert config.plot is True
        assert config.ramp_width == 4.0
        assert config.log_level == "DEBUG"

    def test_negative_sigma(self):
        with pytest.raises(UsageError):
            parse_config(["--sigma", "-1"])

    def test_unknown_flag(self):
        with pytest.raises(UsageError):
            parse_config(["--colour", "red"])

    def test_missing_flag_value(self):
        with pytest.raises(UsageError):
            parse_config(["--seed"])

    @pytest.mark.parametrize("experiment", ["figure2", "figure3"])
    def test_sweeps_need_two_replications(self, experiment):
        with pytest.raises(UsageError):
            parse_config(["--experiment", experiment, "--replications", "1"])

    def test_figure3_ensemble_sizes(self):
        config = parse_config(["--experiment", "figure3", "--n", "5,50,100,500"])
        assert config.n == (5, 50, 100, 500)

    def test_figure1_needs_a_single_ensemble_size(self):
        with pytest.raises(UsageError):
            parse_config(["--experiment", "figure1", "--n", "5,500"])

    def test_seed_oracles_flag_and_file(self, tmp_dir):
        assert parse_config(["--seed-oracles", "2"]).seed_oracles == 2
        path = _write_yaml(tmp_dir / "run.yaml", {"seed-oracles": 4, "n": [5, 500]})
        config = parse_config([], file=path)
        assert config.seed_oracles == 4
        assert config.n == (5, 500)

    def test_figure1_allows_one_replication(self):
        assert parse_config(["--experiment", "figure1", "--replications", "1"]).replications == 1

    def test_out_from_environment(self, monkeypatch):
        monkeypatch.setenv(OUT_ENV_VAR, "/tmp/qal-env")
        assert parse_config([]).out == Path("/tmp/qal-env")

    def test_flag_beats_environment(self, monkeypatch):
        monkeypatch.setenv(OUT_ENV_VAR, "/tmp/qal-env")
        assert parse_config(["--out", "flagged"]).out == Path("flagged")

    def test_config_flag_file(self, tmp_dir):
        path = _write_yaml(tmp_dir / "run.yaml", {"seed": 9, "sigma": 2.0})
        config = parse_config(["--config", str(path)])
        assert config.seed == 9
        assert config.sigma == 2.0

    def test_flag_beats_file_and_file_beats_environment(self, tmp_dir, monkeypatch):
        monkeypatch.setenv(OUT_ENV_VAR, "/tmp/qal-env")
        path = _write_yaml(tmp_dir / "run.yaml", {"seed": 9, "out": "from-file"})
        config = parse_config(["--seed", "4"], file=path)
        assert config.seed == 4
        assert config.out == Path("from-file")

    def test_config_flag_replaces_file_argument(self, tmp_dir):
        ignored = _write_yaml(tmp_dir / "a.yaml", {"seed": 1})
        chosen = _write_yaml(tmp_dir / "b.yaml", {"seed": 2})
        assert parse_config(["--config", str(chosen)], file=ignored).seed == 2
