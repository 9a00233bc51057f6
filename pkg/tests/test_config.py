from __future__ import annotations

import pytest

from src.errors import ConfigError
from src.orchestration.config import ExperimentConfig, dump_config, load_config, parse_config
from src.schedules.lr import CyclicLinear, PiecewiseDecay


def test_minimal_config_takes_defaults(write_config):
    cfg = load_config(write_config("model:\n  layer_dims: [2, 16, 2]\ndata:\n  generator: xor\n"))
    assert cfg.model.layer_dims == [2, 16, 2]
    assert cfg.data.generator == "xor"
    assert cfg.trainer.momentum == 0.9
    assert cfg.experiment.recipe == "budget"
    assert cfg.experiment.budgets == [1.0, 1.25, 1.5]
    assert isinstance(cfg.swa.schedule.build(cfg.budget_iters), CyclicLinear)
    pre = cfg.pretrain.schedule.build(cfg.budget_iters)
    assert isinstance(pre, PiecewiseDecay) and pre.budget_iters == cfg.trainer.budget


def test_empty_file_is_all_defaults(write_config):
    assert load_config(write_config("")) == ExperimentConfig()


def test_dump_and_reload(tmp_path, write_config):
    cfg = load_config(write_config())
    again = load_config(dump_config(cfg, tmp_path / "out" / "resolved.yaml"))
    assert again == cfg


def test_alpha2_above_alpha1_names_key_and_line(write_config):
    text = """
    swa:
      schedule:
        kind: cyclic
        alpha1: 0.01
        alpha2: 0.1
        cycle: 5
    """
    with pytest.raises(ConfigError) as err:
        load_config(write_config(text))
    assert "α1 ≥ α2" in str(err.value)
    assert err.value.key == "swa.schedule.alpha2"
    assert err.value.line == 5
    assert err.value.exit_code == 2


def test_cyclic_needs_cycle(write_config):
    with pytest.raises(ConfigError, match="alpha2 and cycle") as err:
        load_config(write_config("swa:\n  schedule: {kind: cyclic, alpha1: 0.1, alpha2: 0.01}\n"))
    assert err.value.key == "swa.schedule"


def test_unknown_key_rejected(write_config):
    with pytest.raises(ConfigError) as err:
        load_config(write_config("model:\n  layer_dims: [2, 4, 2]\n  width: 3\n"))
    assert err.value.key == "model.width"
    assert err.value.line == 3


def test_yaml_syntax_error_has_line(write_config):
    with pytest.raises(ConfigError) as err:
        load_config(write_config("model:\n  layer_dims: [2, 4, 2\ndata:\n  noise: 0.1\n"))
    assert err.value.line is not None
    assert "syntax" in str(err.value)


def test_top_level_must_be_mapping(write_config):
    with pytest.raises(ConfigError):
        load_config(write_config("- 1\n- 2\n"))


def test_budgets_must_exceed_pretrain_fraction():
    with pytest.raises(ConfigError) as err:
        parse_config({"experiment": {"pretrain_fraction": 0.75, "budgets": [0.5, 1.0]}})
    assert err.value.key == "experiment.budgets"


def test_budgets_are_sorted():
    cfg = parse_config({"experiment": {"budgets": [1.5, 1.0, 1.25]}})
    assert cfg.experiment.budgets == [1.0, 1.25, 1.5]


def test_sweep_recipe_needs_entries():
    with pytest.raises(ConfigError, match="lr-sweep"):
        parse_config({"experiment": {"recipe": "lr-sweep"}})


def test_env_placeholder(write_config, monkeypatch):
    monkeypatch.setenv("SWALAB_TEST_OUT", "elsewhere")
    cfg = load_config(write_config("outputs:\n  dir: ${SWALAB_TEST_OUT}\n"))
    assert cfg.outputs.dir == "elsewhere"


@pytest.mark.parametrize("name", ["experiment.yaml", "fixed_lr.yaml", "lr_sweep.yaml"])
def test_bundled_configs_load(name):
    cfg = load_config(f"src/config/{name}")
    assert cfg.model.to_spec().n_params > 0


def test_trainer_config_overrides():
    cfg = ExperimentConfig()
    tcfg = cfg.trainer_config(cfg.swa.schedule.build(100), 100, seed=3, log_snapshots=True)
    assert tcfg.seed == 3 and tcfg.log_snapshots
    assert tcfg.batch_size == cfg.trainer.batch_size
