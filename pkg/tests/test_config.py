"""
Tests for run configuration, settings and the config hash
"""

import json

import pytest

from src.core.config import get_settings
from src.core.errors import ArtifactIOError, ValidationFailure
from src.core.manifest import config_hash
from src.models.config import (
    MomentumMode,
    PipelineMode,
    RunConfig,
    SmoothingMethod,
    load_run_config,
    parse_run_config,
)


class TestRunConfig:
    """Schema validation"""

    def test_defaults_are_the_standard_run(self):
        cfg = RunConfig()
        assert len(cfg.z_schedule) == 41
        assert cfg.z_schedule[0] == 2.0 and cfg.z_schedule[-1] == 6.0
        assert cfg.n_trajectories == 80
        assert cfg.zeta == 373.5
        assert cfg.sensor.magnification_at(17) == 4.0

    def test_every_violation_reported(self):
        raw = RunConfig().model_dump(mode="json")
        raw["z_schedule"] = [3.0, 2.0]
        raw["slit"]["slit_sigma"] = -0.1
        with pytest.raises(ValidationFailure) as exc_info:
            parse_run_config(raw)
        violations = exc_info.value.violations
        assert any(v.startswith("z_schedule") for v in violations)
        assert any(v.startswith("slit.slit_sigma") for v in violations)
        assert exc_info.value.exit_code == 2

    def test_magnification_count(self):
        raw = RunConfig().model_dump(mode="json")
        raw["sensor"]["magnifications"] = [4.0, 4.0, 4.0]
        with pytest.raises(ValidationFailure):
            parse_run_config(raw)

    def test_single_magnification_number(self):
        raw = RunConfig().model_dump(mode="json")
        raw["sensor"]["magnifications"] = 2.5
        assert parse_run_config(raw).sensor.magnifications == [2.5]

    def test_unresolvable_slits(self):
        raw = RunConfig().model_dump(mode="json")
        raw["slit"]["slit_separation"] = 0.5
        with pytest.raises(ValidationFailure):
            parse_run_config(raw)

    def test_load_json_and_yaml(self, tmp_path):
        data = RunConfig().model_dump(mode="json")
        as_json = tmp_path / "run.json"
        as_json.write_text(json.dumps(data), encoding="utf-8")
        as_yaml = tmp_path / "run.yaml"
        as_yaml.write_text("n_trajectories: 12\nzeta: 300\n", encoding="utf-8")
        assert load_run_config(as_json) == RunConfig()
        loaded = load_run_config(as_yaml)
        assert loaded.n_trajectories == 12 and loaded.zeta == 300

    def test_missing_and_malformed_files(self, tmp_path):
        with pytest.raises(ArtifactIOError):
            load_run_config(tmp_path / "absent.json")
        broken = tmp_path / "broken.json"
        broken.write_text("{not json", encoding="utf-8")
        with pytest.raises(ValidationFailure):
            load_run_config(broken)


class TestPipelineMode:
    """--mode parsing"""

    def test_named_modes(self):
        assert PipelineMode.parse("corrected") == PipelineMode()
        legacy = PipelineMode.parse("legacy")
        assert legacy.smoothing == SmoothingMethod.SPLINE
        assert legacy.label() == "legacy"

    def test_custom(self):
        mode = PipelineMode.parse("custom:smoothing=spline,momentum=legacy_tan")
        assert mode.smoothing == SmoothingMethod.SPLINE
        assert mode.momentum == MomentumMode.LEGACY_TAN
        assert mode.label().startswith("custom:")

    @pytest.mark.parametrize("text", ["fast", "custom:speed=high", "custom:smoothing=lowess", "custom:smoothing"])
    def test_rejected(self, text):
        with pytest.raises(ValidationFailure):
            PipelineMode.parse(text)


class TestConfigHash:
    """Dataset identity"""

    def test_stable_hex_digest(self):
        first = config_hash(RunConfig())
        assert first == config_hash(RunConfig())
        assert len(first) == 64
        assert all(c in "0123456789abcdef" for c in first)

    def test_mode_and_output_excluded(self):
        base = RunConfig()
        other = base.model_copy(update={"mode": PipelineMode.legacy(), "output_dir": "/tmp/elsewhere"})
        assert config_hash(other) == config_hash(base)

    def test_physics_included(self):
        base = RunConfig()
        assert config_hash(base.with_overrides(zeta=300.0)) != config_hash(base)


class TestSettings:
    """Environment settings"""

    def test_environment_prefix(self, monkeypatch):
        monkeypatch.setenv("WEAKTRAJ_LOG_LEVEL", "debug")
        monkeypatch.setenv("WEAKTRAJ_OUT", "/tmp/weaktraj-out")
        get_settings.cache_clear()
        settings = get_settings()
        assert settings.LOG_LEVEL == "DEBUG"
        assert settings.OUT == "/tmp/weaktraj-out"
        assert settings.APP_ENV == "testing"
