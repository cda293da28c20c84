"""End-to-end smoke tests for the python bindings.

Runs a miniature pipeline (synthesize, preprocess, train) through the
in-process CLI, then exercises the numpy-facing helpers against its outputs.
"""

import json

import numpy as np
import pytest

import p2pi

TINY_MODEL = {
    "d_model": 16,
    "layers": 1,
    "heads": 2,
    "ff_dim": 32,
    "window": 20,
    "input_width": 82,
    "output_width": 63,
    "dropout": 0.1,
    "precision": "f64",
    "seed": 3,
}


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    raw, art, run = root / "raw", root / "art", root / "run"
    model_cfg = root / "model.json"
    model_cfg.write_text(json.dumps(TINY_MODEL))

    assert p2pi.cli_run(["synth", "--out", str(raw), "--seed", "11",
                         "--duration", "4", "--tasks", "walk,squat"]) == 0
    assert p2pi.cli_run(["preprocess", "--raw", str(raw), "--out", str(art)]) == 0
    assert p2pi.cli_run(["train", "--artifacts", str(art), "--out", str(run),
                         "--model-config", str(model_cfg), "--epochs", "2",
                         "--seed", "5", "--quiet"]) == 0
    return {"raw": raw, "art": art, "run": run}


def test_version_and_constants():
    assert p2pi.__version__ == "0.1.0"
    assert p2pi.GRID_PERIOD == pytest.approx(0.01)
    assert p2pi.amplifier_gain(10e3, 10e3) == 2.0
    assert "walk" in p2pi.task_ids()


def test_artifacts_round_trip_as_numpy(pipeline):
    data = p2pi.load_artifacts(str(pipeline["art"]))
    assert data["with_derivatives"] is False
    assert data["feature_width"] == 82
    assert len(data["recordings"]) == 2
    tasks = {rec["task"] for rec in data["recordings"]}
    assert tasks == {"walk", "squat"}
    for rec in data["recordings"]:
        feats, skel = rec["features"], rec["skeleton"]
        assert feats.ndim == 2 and feats.shape[1] == 82
        assert skel.shape == (feats.shape[0], 63)
        assert np.isfinite(feats).all() and np.isfinite(skel).all()


def test_checkpoint_predictions_score(pipeline):
    data = p2pi.load_artifacts(str(pipeline["art"]))
    rec = data["recordings"][0]
    ckpt = pipeline["run"] / "checkpoint.bin"

    pred = p2pi.predict(str(ckpt), rec["features"])
    assert pred.shape == rec["skeleton"].shape
    assert np.isfinite(pred).all()

    err = p2pi.joint_errors(pred, rec["skeleton"])
    assert err.shape == (rec["features"].shape[0], 21)
    assert (err >= 0).all()

    # rmse/median agree with a direct numpy recomputation
    assert p2pi.rmse(err) == pytest.approx(np.sqrt(np.mean(err**2)), abs=1e-12)
    med, std = p2pi.median_std(err)
    assert med == pytest.approx(np.median(err), abs=1e-12)
    assert std == pytest.approx(np.std(err), abs=1e-12)


def test_identity_prediction_scores_zero():
    truth = np.arange(60, dtype=float).reshape(4, 15)
    truth = np.hstack([truth, truth, truth, truth, truth[:, :3]])  # 63 wide
    err = p2pi.joint_errors(truth, truth)
    assert p2pi.rmse(err) == 0.0


def test_errors_surface_as_pipeline_error(tmp_path):
    with pytest.raises(p2pi.PipelineError):
        p2pi.load_artifacts(str(tmp_path / "missing"))
    with pytest.raises(p2pi.PipelineError):
        p2pi.predict(str(tmp_path / "missing.bin"), np.zeros((30, 82)))


def test_cli_exit_codes_pass_through(tmp_path):
    assert p2pi.cli_run(["synth", "--config", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path / "raw")]) == 2
    assert p2pi.cli_run(["eval", "--artifacts", str(tmp_path / "missing"),
                         "--checkpoint", str(tmp_path / "missing.bin"),
                         "--out", str(tmp_path / "out")]) == 3
