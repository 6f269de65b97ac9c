"""Tester constants, presets and the layered configuration manager."""

from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .errors import ValidationError

CONFIG_DIR = ".shapecheck"
ENV_PREFIX = "SHAPECHECK_"
THRESHOLD_RULES = ("proven", "experiment")


@dataclass(frozen=True)
class TestConfig:
    """Constants of the chi-squared testers.

    Defaults are the proven constants; the ``experiment`` preset swaps in values that
    behave at desk-scale sample sizes.
    """

    __test__ = False  # keep pytest from collecting this class

    eps: float = 0.1
    m_constant: float = 20000.0  # tester budget m = m_constant * sqrt(n) / eps^2
    threshold_constant: float = 0.1  # accept iff Z <= threshold_constant * m * eps^2
    threshold_rule: str = "proven"  # "experiment": accept iff Z <= 2 m eps^2 + sqrt(2n)
    cutoff_constant: float = 1.0 / 50  # A = {i : q_i >= cutoff_constant * eps / n}
    closeness_constant: float = 1.0 / 500  # learners aim for chi^2 <= closeness_constant * eps^2
    birge_gamma: Optional[float] = None  # fixed Birgé gamma; None derives it from eps
    partition_sample_constant: float = 10.0  # adaptive partition uses c * b * ln(b) samples
    unimodal_b_constant: float = 4.0  # b = c * ln(n) / eps^2
    unimodal_mass_sample_constant: float = 12.0  # flattened estimate uses c * b * ln(b) / eps^2 samples
    unimodal_mass_slack: float = 1.0 / 25  # reject if q(kept) < 1 - slack * eps
    removal_count: int = 1
    identity_threshold_constant: float = 0.3
    lcd_sample_constant: float = 124.0
    lcd_band_constant: float = 22.0 / 3
    lcd_normalization_slack: float = 1.0
    mhr_sample_constant: float = 16.0
    mhr_b_constant: float = 1.0
    mhr_tail_constant: float = 0.25
    mhr_band_constant: float = 2.0
    seed: int = 0
    poissonized: bool = True

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValidationError(f"eps must lie in (0, 1], got {self.eps}")
        if self.threshold_rule not in THRESHOLD_RULES:
            raise ValidationError(f"threshold_rule must be one of {THRESHOLD_RULES}, got {self.threshold_rule!r}")
        positive = (
            "m_constant", "threshold_constant", "cutoff_constant", "closeness_constant",
            "partition_sample_constant", "unimodal_b_constant", "unimodal_mass_sample_constant",
            "unimodal_mass_slack", "identity_threshold_constant", "lcd_sample_constant",
            "lcd_band_constant", "lcd_normalization_slack", "mhr_sample_constant", "mhr_b_constant",
            "mhr_tail_constant", "mhr_band_constant",
        )
        for name in positive:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
                raise ValidationError(f"{name} must be a positive number, got {value!r}")
        if self.birge_gamma is not None and self.birge_gamma <= 0:
            raise ValidationError(f"birge_gamma must be positive, got {self.birge_gamma}")
        if self.removal_count < 0:
            raise ValidationError(f"removal_count must be nonnegative, got {self.removal_count}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def with_eps(self, eps: float) -> "TestConfig":
        return replace(self, eps=eps)

    def tester_budget(self, n: int) -> int:
        """m_constant * sqrt(n) / eps^2 samples for the chi-squared stage over n symbols."""
        return math.ceil(self.m_constant * math.sqrt(n) / self.eps**2)

    def threshold(self, m: int, n: int) -> float:
        if self.threshold_rule == "experiment":
            return 2.0 * m * self.eps**2 + math.sqrt(2.0 * n)
        return self.threshold_constant * m * self.eps**2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TestConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValidationError(f"Unknown tester settings: {', '.join(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ValidationError(f"Invalid tester settings: {e}")


PRESETS: Dict[str, Dict[str, Any]] = {
    "proven": {},
    "experiment": {
        "m_constant": 4.0,
        "threshold_rule": "experiment",
        "closeness_constant": 1.0 / 8,
        "birge_gamma": 0.25,
        # removed mass on an in-class pmf stays below 2 * eps / unimodal_b_constant
        "unimodal_b_constant": 4.0,
        "unimodal_mass_slack": 0.5,
        "lcd_sample_constant": 1.0,
        "lcd_band_constant": 22.0 / 3,
        "mhr_b_constant": 0.5,
    },
}


def preset_config(name: str = "proven", **overrides: Any) -> TestConfig:
    """TestConfig for a named preset with field overrides applied on top."""
    if name not in PRESETS:
        raise ValidationError(f"Unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return TestConfig.from_dict({**PRESETS[name], **overrides})


class ConfigManager:
    """Layered configuration for a project directory.

    Layers, lowest to highest precedence:
    1. Built-in preset (``preset`` key, default ``proven``)
    2. Project config (.shapecheck/config.yml)
    3. Local config (.shapecheck/local-config.yml), machine-specific and gitignored
    4. Environment variables (SHAPECHECK_<SECTION>__<KEY>)
    5. Explicit overrides passed by the caller (CLI flags)
    """

    def __init__(self, project_root: Path, overrides: Optional[Dict[str, Any]] = None):
        self.project_root = Path(project_root)
        self.config_dir = self.project_root / CONFIG_DIR
        self.overrides = overrides or {}

    def _load_yaml_config(self, file_path: Path) -> Dict[str, Any]:
        """Load a YAML mapping; a missing file is an empty layer.

        Raises:
            ValidationError: If the file is not valid YAML or not a mapping
        """
        if not file_path.exists():
            return {}
        try:
            data = yaml.safe_load(file_path.read_text()) or {}
        except (yaml.YAMLError, OSError) as e:
            raise ValidationError(f"Invalid config file {file_path}: {e}")
        if not isinstance(data, dict):
            raise ValidationError(f"Config file {file_path} must contain a mapping")
        return data

    def _get_project_config(self) -> Dict[str, Any]:
        return self._load_yaml_config(self.config_dir / "config.yml")

    def _get_local_config(self) -> Dict[str, Any]:
        return self._load_yaml_config(self.config_dir / "local-config.yml")

    def _get_env_config(self) -> Dict[str, Any]:
        """Configuration from SHAPECHECK_* environment variables.

        A double underscore separates nesting levels and values are parsed as YAML scalars:
        - SHAPECHECK_TESTER__M_CONSTANT=4 -> {"tester": {"m_constant": 4}}
        - SHAPECHECK_PRESET=experiment -> {"preset": "experiment"}
        """
        env_config: Dict[str, Any] = {}
        for key, value in os.environ.items():
            if not key.startswith(ENV_PREFIX):
                continue
            path = key[len(ENV_PREFIX):].lower().split("__")
            current = env_config
            for part in path[:-1]:
                current = current.setdefault(part, {})
                if not isinstance(current, dict):
                    break
            else:
                try:
                    current[path[-1]] = yaml.safe_load(value)
                except yaml.YAMLError:
                    current[path[-1]] = value
        return env_config

    def _merge_configs(self, base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        result = base.copy()
        for key, value in override.items():
            if key in result and isinstance(result[key], dict) and isinstance(value, dict):
                result[key] = self._merge_configs(result[key], value)
            else:
                result[key] = value
        return result

    def get_config(self) -> Dict[str, Any]:
        """Merged configuration: preset -> project -> local -> env -> overrides."""
        layered: Dict[str, Any] = {}
        for layer in (self._get_project_config(), self._get_local_config(), self._get_env_config(), self.overrides):
            layered = self._merge_configs(layered, layer)
        preset = layered.get("preset", "proven")
        if preset not in PRESETS:
            raise ValidationError(f"Unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
        base = {"preset": preset, "tester": dict(PRESETS[preset]), "experiment": {}}
        return self._merge_configs(base, layered)

    def get_value(self, key_path: str, default: Any = None) -> Any:
        """Get a value by dot-notation path, e.g. ``tester.m_constant``."""
        current: Any = self.get_config()
        for key in key_path.split("."):
            if not isinstance(current, dict) or key not in current:
                return default
            current = current[key]
        return current

    def has_value(self, key_path: str) -> bool:
        current: Any = self.get_config()
        for key in key_path.split("."):
            if not isinstance(current, dict) or key not in current:
                return False
            current = current[key]
        return True

    def test_config(self, **overrides: Any) -> TestConfig:
        """TestConfig from the ``tester`` section with non-None keyword overrides on top."""
        tester = dict(self.get_value("tester", {}) or {})
        tester.update({k: v for k, v in overrides.items() if v is not None})
        return TestConfig.from_dict(tester)
