"""
Shared fixtures
"""

import json

import numpy as np
import pytest

from src.core.config import get_settings
from src.models.config import Grid, RunConfig, SlitConfig


@pytest.fixture(autouse=True)
def testing_environment(monkeypatch):
    """Fresh settings for every test, never reading a developer's WEAKTRAJ_OUT"""
    monkeypatch.setenv("WEAKTRAJ_APP_ENV", "testing")
    monkeypatch.delenv("WEAKTRAJ_OUT", raising=False)
    monkeypatch.delenv("WEAKTRAJ_DEFAULT_JOBS", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def single_slit() -> SlitConfig:
    return SlitConfig.single_slit(slit_sigma=0.3)


@pytest.fixture
def two_slit() -> SlitConfig:
    return SlitConfig()


@pytest.fixture
def narrow_grid() -> Grid:
    """Holds a single 0.3 mm slit out to z = 3 m"""
    return Grid(x_min=-8.0, x_max=8.0, n_points=4001)


@pytest.fixture
def wide_grid() -> Grid:
    return Grid(x_min=-16.0, x_max=16.0, n_points=4097)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def small_run_config(output_dir, **overrides) -> RunConfig:
    """Six planes, twelve trajectories, noiseless frames"""
    data = {
        "grid": {"x_min": -16.0, "x_max": 16.0, "n_points": 2049},
        "z_schedule": [2.0, 2.1, 2.2, 2.3, 2.4, 2.5],
        "sensor": {
            "pitch_um": 26.0,
            "magnifications": [4.0],
            "noise": {"photon_budget": 1e8, "background_level": 0.0, "rng_seed": 3},
            "noiseless": True,
        },
        "n_trajectories": 12,
        "eval_points": 257,
        "output_dir": str(output_dir),
    }
    data.update(overrides)
    return RunConfig.model_validate(data)


@pytest.fixture
def small_config(tmp_path) -> RunConfig:
    return small_run_config(tmp_path / "run")


@pytest.fixture
def small_config_file(tmp_path, small_config):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(small_config.model_dump(mode="json"), indent=2), encoding="utf-8")
    return path
