# -*- coding: utf-8 -*-
import pytest

from config import CONFIG_ENV_VAR, RunConfig, get_config, load_run_config
from src.core.exceptions import ConfigError, MissingInputError


@pytest.fixture(autouse=True)
def _no_user_config(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)


def test_packaged_defaults():
    cfg = load_run_config()
    assert isinstance(cfg, RunConfig)
    assert cfg.retrieval.mu == 1500
    assert cfg.retrieval.k == 10
    assert cfg.training.dim == 300
    assert cfg.training.negatives == 100
    assert cfg.expansion.alphas[0] == 0.1 and cfg.expansion.num_terms[-1] == 100
    assert cfg.classification.t_grid == [1, 2, 3, 4, 5]
    assert get_config("relemb_config")["seed"] == 1


def test_overrides_take_precedence(tmp_path):
    user = tmp_path / "user.yaml"
    user.write_text("training:\n  dim: 50\n  kind: rpe\nseed: 9\n")
    cfg = load_run_config(str(user), overrides=["training.dim=20", "expansion.alphas=[0.3, 0.7]"])
    assert cfg.training.dim == 20
    assert cfg.training.kind == "rpe"
    assert cfg.expansion.alphas == [0.3, 0.7]
    assert cfg.seed == 9
    assert cfg.training.seed == 9


def test_trainer_seed_can_be_set_separately():
    cfg = load_run_config(overrides=["seed=4", "training.seed=11", "workers=3"])
    assert cfg.training.seed == 11
    assert cfg.training.workers == 3
    assert not cfg.training.deterministic


def test_environment_variable_names_the_user_config(tmp_path, monkeypatch):
    user = tmp_path / "env.yaml"
    user.write_text("retrieval:\n  mu: 2000\n")
    monkeypatch.setenv(CONFIG_ENV_VAR, str(user))
    assert load_run_config().retrieval.mu == 2000


@pytest.mark.parametrize(
    "override",
    ["training.dim=0", "training.kind=word2vec", "expansion.alphas=[1.5]", "classification.t_grid=[6]", "bogus.key=1"],
)
def test_invalid_values_are_config_errors(override):
    with pytest.raises(ConfigError):
        load_run_config(overrides=[override])


def test_malformed_override():
    with pytest.raises(ConfigError):
        load_run_config(overrides=["training.dim"])


def test_missing_or_unparsable_user_config(tmp_path):
    with pytest.raises(MissingInputError):
        load_run_config(str(tmp_path / "absent.yaml"))
    broken = tmp_path / "broken.yaml"
    broken.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_run_config(str(broken))


def test_require_checks_paths(tmp_path):
    corpus = tmp_path / "corpus.tsv"
    corpus.write_text("d1\ttext\n")
    cfg = load_run_config(overrides=[f"paths.corpus={corpus}", f"paths.qrels={tmp_path / 'none.txt'}"])
    assert cfg.require("corpus") == {"corpus": str(corpus)}
    with pytest.raises(MissingInputError):
        cfg.require("qrels")
    with pytest.raises(ConfigError):
        cfg.require("labels")
