"""
Unit tests for tester constants, presets and the layered configuration manager.

Tests cover:
- TestConfig validation, budgets and thresholds
- Presets and overrides
- ConfigManager layering: project, local, environment, explicit overrides
- Malformed config files
"""

import math

import pytest
import yaml

from shapecheck.config import CONFIG_DIR, PRESETS, ConfigManager, TestConfig, preset_config
from shapecheck.errors import ValidationError


# ===== Fixtures =====

@pytest.fixture
def project_dir(tmp_path):
    """A project directory with an empty .shapecheck folder."""
    (tmp_path / CONFIG_DIR).mkdir()
    return tmp_path


@pytest.fixture
def clean_env(monkeypatch):
    """Remove any SHAPECHECK_* variables from the environment."""
    import os

    for key in list(os.environ):
        if key.startswith("SHAPECHECK_"):
            monkeypatch.delenv(key)
    return monkeypatch


def write_yaml(path, data):
    path.write_text(yaml.safe_dump(data))


class TestTestConfig:
    """The frozen constants record."""

    def test_defaults(self):
        cfg = TestConfig()
        assert cfg.threshold_rule == "proven"
        assert cfg.cutoff_constant == pytest.approx(1 / 50)

    def test_budget(self):
        cfg = TestConfig(eps=0.5, m_constant=4.0)
        assert cfg.tester_budget(100) == math.ceil(4.0 * 10 / 0.25)

    def test_proven_threshold(self):
        assert TestConfig(eps=0.2).threshold(1000, 50) == pytest.approx(0.1 * 1000 * 0.04)

    def test_experiment_threshold(self):
        cfg = TestConfig(eps=0.05, threshold_rule="experiment")
        assert cfg.threshold(30000, 50000) == pytest.approx(2 * 30000 * 0.0025 + math.sqrt(100000))

    @pytest.mark.parametrize(
        "field,value",
        [
            ("eps", 0.0),
            ("eps", 1.5),
            ("m_constant", -1.0),
            ("threshold_rule", "loose"),
            ("birge_gamma", 0.0),
            ("removal_count", -1),
            ("seed", -3),
            ("cutoff_constant", math.inf),
        ],
    )
    def test_invalid_values(self, field, value):
        with pytest.raises(ValidationError):
            TestConfig(**{field: value})

    def test_with_eps_keeps_other_fields(self):
        cfg = TestConfig(m_constant=7.0).with_eps(0.3)
        assert cfg.eps == 0.3 and cfg.m_constant == 7.0

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ValidationError, match="m_konstant"):
            TestConfig.from_dict({"m_konstant": 3})

    def test_dict_form(self):
        data = TestConfig(eps=0.2).to_dict()
        assert TestConfig.from_dict(data) == TestConfig(eps=0.2)


class TestPresets:
    """Named constant sets."""

    def test_proven_is_default(self):
        assert preset_config("proven") == TestConfig()

    def test_experiment_preset(self):
        cfg = preset_config("experiment")
        assert cfg.threshold_rule == "experiment"
        assert cfg.m_constant == PRESETS["experiment"]["m_constant"]

    def test_experiment_removal_budget_fits_slack(self):
        cfg = preset_config("experiment")
        assert 2.0 / cfg.unimodal_b_constant <= cfg.unimodal_mass_slack

    def test_overrides_win(self):
        assert preset_config("experiment", m_constant=9.0).m_constant == 9.0

    def test_unknown_preset(self):
        with pytest.raises(ValidationError, match="Unknown preset"):
            preset_config("fast")


class TestConfigManager:
    """Layered configuration."""

    def test_defaults_without_files(self, tmp_path, clean_env):
        config = ConfigManager(tmp_path).get_config()
        assert config["preset"] == "proven"
        assert config["tester"] == {}
        assert config["experiment"] == {}

    def test_project_file(self, project_dir, clean_env):
        write_yaml(project_dir / CONFIG_DIR / "config.yml", {"tester": {"m_constant": 5}})
        assert ConfigManager(project_dir).get_value("tester.m_constant") == 5

    def test_local_overrides_project(self, project_dir, clean_env):
        write_yaml(project_dir / CONFIG_DIR / "config.yml", {"tester": {"m_constant": 5, "seed": 1}})
        write_yaml(project_dir / CONFIG_DIR / "local-config.yml", {"tester": {"m_constant": 6}})
        manager = ConfigManager(project_dir)
        assert manager.get_value("tester.m_constant") == 6
        assert manager.get_value("tester.seed") == 1

    def test_env_overrides_files(self, project_dir, clean_env):
        write_yaml(project_dir / CONFIG_DIR / "config.yml", {"tester": {"m_constant": 5}})
        clean_env.setenv("SHAPECHECK_TESTER__M_CONSTANT", "8")
        assert ConfigManager(project_dir).get_value("tester.m_constant") == 8

    def test_explicit_overrides_win(self, project_dir, clean_env):
        clean_env.setenv("SHAPECHECK_TESTER__M_CONSTANT", "8")
        manager = ConfigManager(project_dir, overrides={"tester": {"m_constant": 2}})
        assert manager.get_value("tester.m_constant") == 2

    def test_preset_from_env(self, tmp_path, clean_env):
        clean_env.setenv("SHAPECHECK_PRESET", "experiment")
        config = ConfigManager(tmp_path).get_config()
        assert config["preset"] == "experiment"
        assert config["tester"]["threshold_rule"] == "experiment"

    def test_file_values_layer_over_preset(self, project_dir, clean_env):
        write_yaml(project_dir / CONFIG_DIR / "config.yml", {"preset": "experiment", "tester": {"m_constant": 3}})
        tester = ConfigManager(project_dir).test_config()
        assert tester.m_constant == 3
        assert tester.threshold_rule == "experiment"

    def test_unknown_preset(self, tmp_path, clean_env):
        with pytest.raises(ValidationError):
            ConfigManager(tmp_path, overrides={"preset": "fast"}).get_config()

    def test_test_config_ignores_none(self, tmp_path, clean_env):
        cfg = ConfigManager(tmp_path).test_config(eps=0.3, seed=None)
        assert cfg.eps == 0.3 and cfg.seed == 0

    def test_test_config_rejects_unknown_keys(self, project_dir, clean_env):
        write_yaml(project_dir / CONFIG_DIR / "config.yml", {"tester": {"budget": 3}})
        with pytest.raises(ValidationError, match="budget"):
            ConfigManager(project_dir).test_config()

    def test_get_value_default(self, tmp_path, clean_env):
        manager = ConfigManager(tmp_path)
        assert manager.get_value("tester.missing", 42) == 42
        assert not manager.has_value("tester.missing")
        assert manager.has_value("preset")

    def test_corrupt_yaml(self, project_dir, clean_env):
        (project_dir / CONFIG_DIR / "config.yml").write_text("tester: [unclosed")
        with pytest.raises(ValidationError, match="Invalid config file"):
            ConfigManager(project_dir).get_config()

    def test_non_mapping_yaml(self, project_dir, clean_env):
        (project_dir / CONFIG_DIR / "config.yml").write_text("- a\n- b\n")
        with pytest.raises(ValidationError, match="mapping"):
            ConfigManager(project_dir).get_config()

    def test_empty_file(self, project_dir, clean_env):
        (project_dir / CONFIG_DIR / "config.yml").write_text("")
        assert ConfigManager(project_dir).get_config()["preset"] == "proven"
