from __future__ import annotations

import pandas as pd
import pytest

from src.app.cli import build_parser, main
from src.model.network import evaluate
from src.model.spec import init_state
from src.orchestration.checkpoint import encode_checkpoint, load_checkpoint
from src.orchestration.config import load_config
from src.sources.repository import make_dataset


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("SWALAB_PROGRESS", "0")
    monkeypatch.delenv("SWALAB_CONFIG", raising=False)


@pytest.mark.parametrize("argv", [["gradcheck"], ["gradcheck", "--quiet"], ["--quiet", "gradcheck"]])
def test_gradcheck_passes(argv, capsys):
    assert main(argv) == 0
    assert "max_rel_error" in capsys.readouterr().out


def test_global_flags_on_either_side():
    args = build_parser().parse_args(["eval", "a.swac", "--seed", "3", "--out", "x"])
    assert args.seed == 3 and args.out == "x"
    args = build_parser().parse_args(["--seed", "4", "eval", "a.swac"])
    assert args.seed == 4 and args.quiet is False


def test_quad_sim_writes_curve(tmp_path, capsys):
    out = tmp_path / "quad"
    assert main(["quad-sim", "--dim", "5", "--iters", "2000", "--out", str(out), "--quiet"]) == 0
    curve = pd.read_csv(out / "quad-convergence.csv")
    assert {"k", "mean_err", "raw_iterate_rms", "mahalanobis_ratio"} <= set(curve.columns)
    assert (out / "quad-convergence.gp").exists()
    assert "ellipsoid ratio" in capsys.readouterr().out


def test_quad_sim_unstable_rate_exits_2(tmp_path):
    assert main(["quad-sim", "--alpha", "1.5", "--out", str(tmp_path / "q"), "--quiet"]) == 2


def test_bad_config_exits_2(write_config):
    path = write_config("swa:\n  schedule:\n    kind: cyclic\n    alpha1: 0.01\n    alpha2: 0.1\n    cycle: 5\n")
    assert main(["--config", str(path), "experiment", "--quiet"]) == 2


def test_missing_checkpoint_exits_4(write_config, tmp_path):
    assert main(["eval", str(tmp_path / "absent.swac"), "--config", str(write_config()), "--quiet"]) == 4


def test_corrupt_checkpoint_exits_4(write_config, tmp_path, bn_spec):
    data = bytearray(encode_checkpoint(init_state(bn_spec, seed=0)))
    data[-10] ^= 0xFF
    bad = tmp_path / "bad.swac"
    bad.write_bytes(bytes(data))
    assert main(["eval", str(bad), "--config", str(write_config()), "--quiet"]) == 4


def test_train_swa_and_analysis_pipeline(write_config, tmp_path):
    cfg_path = str(write_config())
    common = ["--config", cfg_path, "--quiet"]

    assert main(["train", "--iters", "60", "--out", str(tmp_path / "train"), *common]) == 0
    sgd_path = tmp_path / "train" / "sgd.swac"
    assert sgd_path.exists()

    swa_dir = tmp_path / "swa"
    assert main(["swa", "--init", str(sgd_path), "--iters", "60", "--snapshots", "--out", str(swa_dir), *common]) == 0
    snapshots = sorted(swa_dir.glob("snapshot-*.swac"))
    assert len(snapshots) == 6
    assert (swa_dir / "swa.swac").exists()

    eval_dir = tmp_path / "eval"
    assert main(["eval", str(swa_dir / "swa.swac"), "--out", str(eval_dir), *common]) == 0
    table = pd.read_csv(eval_dir / "eval.csv")
    data = make_dataset(load_config(cfg_path).data)
    expected = evaluate(load_checkpoint(swa_dir / "swa.swac"), data.test).error
    assert table.loc[0, "test_err"] == pytest.approx(expected, abs=1e-12)

    land = tmp_path / "land"
    assert main(["landscape", "ray", str(swa_dir / "swa.swac"), "--n-rays", "2", "--n-ts", "5",
                 "--t-max", "1", "--delta", "0.1", "--out", str(land), *common]) == 0
    assert (land / "landscape-width.csv").exists()
    assert main(["landscape", "segment", str(swa_dir / "swa.swac"), str(sgd_path), "--points", "5",
                 "--out", str(land), *common]) == 0
    assert len(pd.read_csv(land / "landscape-segment.csv")) == 5
    assert main(["landscape", "plane", *map(str, snapshots[:3]), "--resolution", "3", "--out", str(land), *common]) == 0
    assert len(pd.read_csv(land / "landscape-plane.csv")) == 9

    ens = tmp_path / "ens"
    assert main(["ensemble-compare", *map(str, snapshots), "--scaling", "--n-directions", "3",
                 "--eps", "0.1", "0.01", "--out", str(ens), *common]) == 0
    assert (ens / "ensemble.csv").exists()
    assert len(pd.read_csv(ens / "scaling.csv")) == 2
