"""Tests for run configuration loading and precedence."""

import math
import os

import pytest
import yaml

from polyheat.core.exceptions import ConfigError
from polyheat.utils.config import RunConfig, build_config, load_config, save_config


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig()
        assert config.grid.points_per_axis == 4096
        assert config.norms.p == [2.0, 9.0, math.inf]
        assert config.operator.majorant_exponent is None

    def test_flat_round_trip(self):
        config = RunConfig(command="decay")
        config.update({"grid.box_length": 64, "nonlinearity.sign": -1, "norms.p": [9, "inf"]})
        flat = config.to_flat()
        assert flat["norms.p"] == [9.0, "inf"]
        assert RunConfig.from_flat(flat) == config

    @pytest.mark.parametrize("key", ["grid.nope", "nope", "grid"])
    def test_unknown_keys(self, key):
        with pytest.raises(ConfigError):
            RunConfig().update({key: 1})

    def test_type_errors(self):
        with pytest.raises(ConfigError):
            RunConfig().update({"grid.points_per_axis": 10.5})
        with pytest.raises(ConfigError):
            RunConfig().update({"solver.T": "soon"})
        with pytest.raises(ConfigError):
            RunConfig().update({"solver.T": None})

    def test_unknown_command(self):
        with pytest.raises(ConfigError):
            RunConfig(command="plot")


class TestConfigFiles:
    def test_nested_sections_are_flattened(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text(yaml.safe_dump({"grid": {"points_per_axis": 512}, "solver.T": 5}))
        assert load_config(path) == {"grid.points_per_axis": 512, "solver.T": 5}

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")
        bad = tmp_path / "bad.yaml"
        bad.write_text("- just\n- a list\n")
        with pytest.raises(ConfigError):
            load_config(bad)

    def test_save_then_build(self, tmp_path, monkeypatch):
        monkeypatch.delenv("POLYHEAT_OUT", raising=False)
        config = RunConfig(command="solve")
        config.update({"solver.steps": 32, "norms.p": ["inf"]})
        path = save_config(config, tmp_path / "config.yaml")
        rebuilt = build_config("solve", str(path))
        assert rebuilt == config


class TestBuildConfig:
    @pytest.fixture(autouse=True)
    def _clean_env(self, monkeypatch, tmp_path):
        monkeypatch.delenv("POLYHEAT_OUT", raising=False)
        monkeypatch.chdir(tmp_path)

    def test_overrides_win_over_file(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("solver.T: 5\nsolver.steps: 64\n")
        config = build_config("solve", str(path), {"solver.T": 7.5, "solver.steps": None})
        assert config.solver.T == 7.5
        assert config.solver.steps == 64
        assert config.command == "solve"

    def test_file_command_is_ignored(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("command: decay\n")
        assert build_config("norm", str(path)).command == "norm"

    def test_environment_sets_output_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv("POLYHEAT_OUT", "/tmp/elsewhere")
        path = tmp_path / "run.yaml"
        path.write_text("output_dir: from-file\n")
        assert build_config("solve", str(path)).output_dir == "/tmp/elsewhere"

    def test_explicit_output_dir_beats_environment(self, monkeypatch):
        monkeypatch.setenv("POLYHEAT_OUT", "/tmp/elsewhere")
        config = build_config("solve", overrides={"output_dir": "local"})
        assert config.output_dir == "local"

    def test_dotenv_file_is_read(self, tmp_path):
        (tmp_path / ".env").write_text("POLYHEAT_OUT=from-dotenv\n")
        try:
            assert build_config("solve").output_dir == "from-dotenv"
        finally:
            os.environ.pop("POLYHEAT_OUT", None)
