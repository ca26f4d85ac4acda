import csv
import json
from pathlib import Path

import pytest

from aidmine.cli import main

SCHEMA = {"timestamp": "timestamp", "iob": "iob", "cob": "cob", "bg": "bg"}


def write_config(directory: Path, **overrides) -> Path:
    config = {
        "input": {"path": str(directory / "synthetic.csv"), "schema": SCHEMA},
        "frequency": "hourly",
        "mp": {"m": 7, "variable": "iob"},
        "cluster": {"k": 2, "seed": 0, "n_init": 2, "max_iter": 20},
        "crossval": {"n_folds": 4},
        "synth": {"seed": 0, "days": 24, "noise_std": 0.02, "weekday_effect": 0.1,
                  "seasonal_drift": 0.05},
        "out_dir": str(directory / "out"),
    }
    config.update(overrides)
    file = directory / "config.json"
    file.write_text(json.dumps(config), encoding="utf-8")
    return file


@pytest.fixture()
def workspace(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "synthetic.csv").is_file()
    return tmp_path, cfg


def manifest_of(out_dir: Path) -> dict:
    return json.loads((out_dir / "manifest.json").read_text(encoding="utf-8"))


def test_synth_then_ingest_resample(workspace):
    tmp, cfg = workspace
    out = tmp / "out"
    assert main(["ingest", "--config", str(cfg)]) == 0
    report = json.loads((out / "load_report.json").read_text())
    assert report["rows_kept"] > 0 and report["rows_dropped_no_offset"] == 0

    assert main(["resample", "--config", str(cfg)]) == 0
    summary = json.loads((out / "resample_summary.json").read_text())
    assert summary["segments"] == 24
    manifest = manifest_of(out)
    for name in manifest["artifacts"]:
        assert (out / name).is_file()


def test_mp_profile_length_and_artifacts(tmp_path):
    cfg = write_config(tmp_path, synth={"seed": 1, "days": 71, "noise_std": 0.02})
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert main(["mp", "--config", str(cfg), "--m", "7"]) == 0
    out = tmp_path / "out"
    with (out / "matrix_profile_iob.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 65  # 71 days, m=7
    summary = json.loads((out / "mp_summary_iob.json").read_text())
    assert summary["profile_length"] == 65
    assert (out / "matrix_profile_iob.svg").is_file()


def test_cluster_emits_model_and_barycenter_svgs(workspace):
    tmp, cfg = workspace
    assert main(["cluster", "--config", str(cfg), "--k", "2"]) == 0
    out = tmp / "out"
    model = json.loads((out / "cluster_model.json").read_text())
    assert model["k"] == 2
    assert len(model["barycenters"]) == 2
    assert (out / "barycenter_cluster0.svg").is_file()
    assert (out / "barycenter_cluster1.svg").is_file()


def test_validate_passes_on_clean_data(workspace):
    tmp, cfg = workspace
    assert main(["validate", "--config", str(cfg)]) == 0
    report = json.loads((tmp / "out" / "fidelity_report.json").read_text())
    assert report["passed"] is True


def test_heatmap_and_elbow_and_crossval(workspace):
    tmp, cfg = workspace
    out = tmp / "out"
    assert main(["heatmap", "--config", str(cfg)]) == 0
    assert (out / "heatmap_bg.svg").is_file()

    assert main(["elbow", "--config", str(cfg)]) == 0
    elbow = json.loads((out / "elbow_summary.json").read_text())
    assert {p["k"] for p in elbow["points"]} >= {1, 2, 3}

    assert main(["crossval", "--config", str(cfg), "--n-folds", "4"]) == 0
    stability = json.loads((out / "stability_report.json").read_text())
    assert stability["stable"] is True


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps({"inputs": {}}), encoding="utf-8")
    assert main(["ingest", "--config", str(cfg)]) == 2

    cfg.write_text(json.dumps({"cluster": {"clusters": 2}}), encoding="utf-8")
    assert main(["cluster", "--config", str(cfg)]) == 2


def test_missing_input_is_usage_error(tmp_path):
    cfg = write_config(tmp_path, input={"path": str(tmp_path / "missing.csv"), "schema": SCHEMA})
    assert main(["ingest", "--config", str(cfg)]) == 2


def test_missing_config_is_usage_error(tmp_path):
    assert main(["ingest", "--config", str(tmp_path / "none.json")]) == 2


def test_cluster_band_sweep_table(tmp_path):
    cfg = write_config(
        tmp_path,
        cluster={"k": 2, "seed": 0, "n_init": 2, "max_iter": 15, "band_sweep": [None, 2, 6]},
    )
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert main(["cluster", "--config", str(cfg)]) == 0
    with (tmp_path / "out" / "band_sweep.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["band_radius"] for r in rows] == ["", "2", "6"]
    assert all(r["silhouette"] for r in rows)


def test_manifests_identical_across_runs(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["synth", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    assert main(["cluster", "--config", str(cfg), "--out", str(out_a)]) == 0
    assert main(["cluster", "--config", str(cfg), "--out", str(out_b)]) == 0
    assert (out_a / "manifest.json").read_bytes() == (out_b / "manifest.json").read_bytes()
