"""
End-to-end tests of the command line
"""

import json

import pytest

from src.cli import main
from src.core.config import get_settings
from tests.conftest import small_run_config


def write_config(path, cfg) -> str:
    path.write_text(json.dumps(cfg.model_dump(mode="json")), encoding="utf-8")
    return str(path)


def last_json_line(capsys) -> dict:
    out = capsys.readouterr().out.strip().splitlines()
    return json.loads(out[-1])


@pytest.mark.integration
class TestPipelineCommands:
    """synthesize -> reconstruct -> compare -> report"""

    def test_three_step_route(self, small_config_file, capsys):
        config = str(small_config_file)
        assert main(["synthesize", "--config", config]) == 0
        summary = last_json_line(capsys)
        assert summary["planes"] == 6
        assert sorted(p.name for p in (small_config_file.parent / "run" / "frames").iterdir()) == [
            f"frame_{i:03d}.csv" for i in range(6)
        ]

        assert main(["reconstruct", "--config", config]) == 0
        details = last_json_line(capsys)
        assert details["mode"] == "corrected"
        assert details["r_avg"] > 0.9

        assert main(["reconstruct", "--config", config, "--mode", "legacy"]) == 0
        assert main(["compare", "--config", config, "recon_corrected/ensemble.csv", "bohm_truth.csv"]) == 0
        compared = last_json_line(capsys)
        assert compared["pairs_skipped"] == 0

        assert main(["report", "--config", config]) == 0
        rows = [json.loads(line) for line in capsys.readouterr().out.strip().splitlines()]
        assert {row["source"] for row in rows} == {"compare", "recon_corrected", "recon_legacy"}

        manifest = json.loads((small_config_file.parent / "run" / "manifest.json").read_text())
        assert [s["stage"] for s in manifest["stages"]] == ["synthesize", "reconstruct", "reconstruct", "compare"]
        assert all(s["status"] == "completed" for s in manifest["stages"])
        assert "recon_legacy/ensemble.csv" in manifest["files"]

    def test_run_matches_separate_stages(self, tmp_path, monkeypatch, small_config_file):
        config = str(small_config_file)

        monkeypatch.setenv("WEAKTRAJ_OUT", str(tmp_path / "one_shot"))
        get_settings.cache_clear()
        assert main(["run", "--config", config]) == 0

        monkeypatch.setenv("WEAKTRAJ_OUT", str(tmp_path / "staged"))
        get_settings.cache_clear()
        assert main(["synthesize", "--config", config]) == 0
        assert main(["reconstruct", "--config", config]) == 0
        assert main(["compare", "--config", config, "recon_corrected/ensemble.csv", "bohm_truth.csv"]) == 0

        one_shot = (tmp_path / "one_shot" / "compare" / "report.json").read_bytes()
        staged = (tmp_path / "staged" / "compare" / "report.json").read_bytes()
        assert one_shot == staged

    def test_bohm_methods(self, small_config_file, capsys):
        config = str(small_config_file)
        for method in ("cdf", "cvt", "slope"):
            assert main(["bohm", "--config", config, "--method", method]) == 0
            assert last_json_line(capsys)["file"] == f"bohm_{method}.csv"
        assert (small_config_file.parent / "run" / "bohm_cvt.csv").exists()

    def test_phase_reads_stored_fields(self, small_config_file, capsys):
        config = str(small_config_file)
        run = small_config_file.parent / "run"
        assert main(["bohm", "--config", config, "--method", "phase"]) == 0
        propagated = (run / "bohm_phase.csv").read_text()

        assert main(["synthesize", "--config", config]) == 0
        assert sorted(p.name for p in (run / "fields").iterdir()) == [f"field_{i:03d}.csv" for i in range(6)]
        assert main(["bohm", "--config", config, "--method", "phase"]) == 0
        assert (run / "bohm_phase.csv").read_text() == propagated

        (run / "fields" / "field_003.csv").unlink()
        capsys.readouterr()
        assert main(["bohm", "--config", config, "--method", "phase"]) == 5
        assert "z-index 3" in capsys.readouterr().err

    def test_svg_overlay(self, small_config_file):
        pytest.importorskip("matplotlib")
        config = str(small_config_file)
        assert main(["run", "--config", config, "--svg"]) == 0
        svg = (small_config_file.parent / "run" / "compare" / "overlay.svg").read_text()
        assert svg.lstrip().startswith("<?xml")


@pytest.mark.integration
class TestDeterminism:
    """Seeded frames are reproducible"""

    def test_same_seed_same_frames(self, tmp_path):
        noisy = {"sensor": {"pitch_um": 26.0, "magnifications": [4.0],
                            "noise": {"photon_budget": 1e6, "background_level": 5.0, "rng_seed": 0}}}
        a = write_config(tmp_path / "a.json", small_run_config(tmp_path / "a", **noisy))
        b = write_config(tmp_path / "b.json", small_run_config(tmp_path / "b", **noisy))
        assert main(["synthesize", "--config", a, "--seed", "5"]) == 0
        assert main(["synthesize", "--config", b, "--seed", "5"]) == 0
        for i in range(6):
            name = f"frames/frame_{i:03d}.csv"
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
        assert "# rng=PCG64:5\n" in (tmp_path / "a" / "frames" / "frame_000.csv").read_text()


class TestExitCodes:
    """Error categories map to exit codes"""

    def test_invalid_config(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"n_trajectories": 0, "z_schedule": [1.0]}), encoding="utf-8")
        assert main(["synthesize", "--config", str(path)]) == 2
        err = capsys.readouterr().err
        assert "n_trajectories" in err and "z_schedule" in err

    def test_bad_mode(self, small_config_file):
        assert main(["reconstruct", "--config", str(small_config_file), "--mode", "fastest"]) == 2

    def test_missing_frames(self, small_config_file, capsys):
        assert main(["reconstruct", "--config", str(small_config_file)]) == 5
        assert "z-index 0" in capsys.readouterr().err

    def test_mixed_configurations(self, small_config_file):
        config = str(small_config_file)
        assert main(["synthesize", "--config", config]) == 0
        assert main(["reconstruct", "--config", config, "--seed", "9"]) == 3
        assert main(["reconstruct", "--config", config, "--seed", "9", "--force"]) == 0

    def test_missing_ensemble(self, small_config_file):
        assert main(["compare", "--config", str(small_config_file), "nope.csv", "bohm_truth.csv"]) == 5
