from __future__ import annotations

import pytest

from polar.errors import ConfigError
from polar.settings import (
    ABLATION_FLAGS,
    RunConfig,
    load_config,
    parse_assignments,
    read_config_file,
    write_config_file,
)


class TestDefaults:
    def test_packaged_values(self):
        cfg = RunConfig.defaults()
        assert cfg.lr == 2e-3 and cfg.weight_decay == 1e-5 and cfg.dropout == 0.2
        assert cfg.lr_schedule == "linear" and cfg.log_level == ""
        assert cfg.alpha_init == 1.5 and cfg.gcn_hidden == 350 and cfg.gcn_layers == 2
        assert cfg.enc_layers == 2 and cfg.enc_hidden == 96 and cfg.enc_heads == 4
        assert cfg.epochs == 10 and cfg.batch_size == 8 and cfg.seed == 7

    def test_no_ablation_by_default(self):
        assert not any(RunConfig.defaults().ablations().values())
        assert set(RunConfig.defaults().ablations()) == set(ABLATION_FLAGS)


class TestLayering:
    def test_file_then_set_then_flags(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# run\nlr = 0.01\nepochs = 3  # short\nno_pgi = true\n", encoding="utf-8")
        cfg = load_config(path, ["epochs=4", "seed=11"], {"seed": 12, "dropout": None})
        assert cfg.lr == 0.01
        assert cfg.epochs == 4
        assert cfg.seed == 12
        assert cfg.no_pgi is True
        assert cfg.dropout == 0.2

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            load_config(overrides=["learning_rate=0.1"])

    def test_wrong_type(self):
        with pytest.raises(ConfigError, match="epochs"):
            load_config(overrides=["epochs=many"])

    def test_bool_from_string(self):
        assert load_config(overrides=["no_prune=yes"]).no_prune is True

    def test_validation(self):
        with pytest.raises(ConfigError, match="alpha_init"):
            load_config(overrides=["alpha_init=2.5"])

    @pytest.mark.parametrize("pair", ["lr_schedule=cosine", "log_level=chatty"])
    def test_rejects_unknown_choice(self, pair):
        with pytest.raises(ConfigError, match=pair.split("=")[0]):
            load_config(overrides=[pair])

    def test_log_level_case_insensitive(self):
        assert load_config(overrides=["log_level=debug"]).log_level == "debug"

    def test_malformed_assignment(self):
        with pytest.raises(ConfigError):
            parse_assignments(["lr"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_config_file(tmp_path / "nope.cfg")

    def test_missing_keys(self):
        with pytest.raises(ConfigError, match="missing"):
            RunConfig.from_mapping({"lr": 0.1})


class TestDigest:
    def test_stable(self):
        assert RunConfig.defaults().digest() == RunConfig.defaults().digest()

    def test_sensitive(self):
        assert RunConfig.defaults().digest() != RunConfig.defaults().replace(seed=8).digest()

    def test_written_file_reloads(self, tmp_path):
        cfg = RunConfig.defaults().replace(lr=0.003, prune_axis="col", train_path="data/train.jsonl")
        write_config_file(cfg, tmp_path / "config.txt")
        assert load_config(tmp_path / "config.txt") == cfg


class TestPaths:
    def test_unset_path(self):
        with pytest.raises(ConfigError, match="train_path"):
            RunConfig.defaults().replace(train_path="").check_paths(["train_path"])

    def test_missing_path(self, tmp_path):
        with pytest.raises(ConfigError, match="does not exist"):
            RunConfig.defaults().replace(train_path=str(tmp_path / "x.jsonl")).check_paths(["train_path"])
