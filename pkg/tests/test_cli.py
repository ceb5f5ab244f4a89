import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from groupsense.cli import main
from groupsense.config import RunConfig, dump_config, load_config
from groupsense.errors import ConfigInvalid

SMALL_INI = """\
[gbdt]
n_trees = 10
cv_folds = 3
tuning_fraction = 0.4

[grid]
tune_folds = 3

[simulator]
n_participants = 10
duration_s = 400
"""


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    (root / "small.ini").write_text(SMALL_INI)
    code = main(["pipeline", "--config", str(root / "small.ini"), "--data-dir", str(root / "data"),
                 "--out-dir", str(root / "out"), "--seed", "7"])
    assert code == 0
    return root


def _args(root, *extra):
    return ["--config", str(root / "small.ini"), "--data-dir", str(root / "data"),
            "--out-dir", str(root / "out"), "--seed", "7", *extra]


def test_pipeline_writes_every_artifact(run_dir):
    names = {p.name for p in (run_dir / "out").iterdir()}
    for f in ("features.csv", "np_baseline.csv", "tuning.json", "model.json", "predictions.csv",
              "partitions.csv", "metrics.json", "pr_curve.csv", "pr_curves.svg", "resolution_sweep.svg"):
        assert f in names
    metrics = json.loads((run_dir / "out" / "metrics.json").read_text())
    assert 0 < metrics["link"]["npc"]["ap"] < metrics["link"]["model"]["ap"] <= 1


def test_groups_covers_every_second_and_participant(run_dir, capsys):
    assert main(["groups", *_args(run_dir, "--resolution", "0.5", "--format", "json")]) == 0
    out = json.loads(capsys.readouterr().out)
    parts = pd.read_csv(run_dir / "out" / "partitions.csv")
    assert out["rows"] == len(parts) == 400 * 10
    counts = parts.groupby("second").size()
    assert len(counts) == 400 and (counts == 10).all()


def test_groups_is_idempotent(run_dir):
    path = run_dir / "out" / "partitions.csv"
    assert main(["groups", *_args(run_dir)]) == 0
    first = path.read_bytes()
    assert main(["groups", *_args(run_dir)]) == 0
    assert path.read_bytes() == first


def test_evaluate_without_model_is_input_missing(tmp_path, run_dir, capsys):
    out = tmp_path / "out"
    out.mkdir()
    for f in ("features.csv", "np_baseline.csv", "tuning.json", "predictions.csv"):
        (out / f).write_bytes((run_dir / "out" / f).read_bytes())
    code = main(["evaluate", "--config", str(run_dir / "small.ini"), "--out-dir", str(out)])
    assert code != 0
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "InputMissing"
    assert "model.json" in err["message"]


def test_features_without_session_is_input_missing(tmp_path, capsys):
    code = main(["features", "--data-dir", str(tmp_path / "nowhere"), "--out-dir", str(tmp_path)])
    assert code != 0
    assert json.loads(capsys.readouterr().err)["error"] == "InputMissing"


@pytest.mark.parametrize("text", [
    "[gbdt]\ncv_folds = 1\n",
    "[gbdt]\nsubsample = 0\n",
    "[community]\nedge_floor = 2\n",
    "[features]\ngroups = interpersonal, telepathy\n",
    "[gbdt]\nn_trees = many\n",
    "[mystery]\nkey = 1\n",
    "[run]\nseeds = 3\n",
])
def test_bad_config_is_config_invalid(tmp_path, capsys, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    assert main(["config", "--config", str(path)]) != 0
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigInvalid"


def test_flags_override_config(tmp_path, capsys):
    path = tmp_path / "c.ini"
    path.write_text("[run]\nseed = 3\njobs = 2\n")
    assert main(["config", "--config", str(path), "--seed", "11"]) == 0
    cfg = load_config_from_text(capsys.readouterr().out, tmp_path)
    assert cfg.seed == 11 and cfg.jobs == 2


def load_config_from_text(text, tmp_path):
    p = tmp_path / "echo.ini"
    p.write_text(text)
    return load_config(p)


def test_shipped_default_config_matches_defaults():
    shipped = Path(__file__).resolve().parents[1] / "config" / "default.ini"
    assert shipped.read_text() == dump_config(RunConfig())
    assert load_config(shipped) == RunConfig()


def test_dump_round_trip_non_default(tmp_path):
    cfg = RunConfig().with_(seed=5, resolutions=(0.25, 0.5), ablation=("motion",), grid_enabled=True)
    p = tmp_path / "x.ini"
    p.write_text(dump_config(cfg))
    assert load_config(p) == cfg


def test_validate_rejects_bad_values():
    with pytest.raises(ConfigInvalid):
        RunConfig().with_(jobs=0).validate()
    with pytest.raises(ConfigInvalid):
        RunConfig().with_(resolutions=()).validate()
    assert np.isclose(RunConfig().validate().edge_floor, 0.05)
