from __future__ import annotations

import json

import pytest

from polar.cli import main
from polar.data.corpus import load_corpus, save_corpus
from polar.settings import write_config_file
from polar.ui.text import PRUNING_DISABLED

GEN_ARGS = ["--dialogues", "40", "--seed", "3", "--set", "vocab_size=60", "--set", "n_predicates=2",
            "--set", "fillers_per_role=2", "--set", "max_utterances=4"]


@pytest.fixture
def data_dir(tmp_path):
    out = tmp_path / "data"
    assert main(["gen-data", "--out", str(out), *GEN_ARGS]) == 0
    return out


def _train(tmp_path, data_dir, cfg, *extra):
    cfg_file = tmp_path / "run.txt"
    write_config_file(cfg.replace(train_path=str(data_dir / "train.jsonl"), dev_path=str(data_dir / "dev.jsonl")), cfg_file)
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg_file), "--out", str(out), *extra]) == 0
    return out


def _error_line(err: str) -> str:
    return [line for line in err.splitlines() if line.startswith("error code=")][-1]


class TestGenData:
    def test_split(self, data_dir):
        sizes = {name: len(load_corpus(data_dir / f"{name}.jsonl")) for name in ("train", "dev", "test")}
        assert sizes == {"train": 32, "dev": 4, "test": 4}

    def test_same_seed_same_files(self, data_dir, tmp_path):
        again = tmp_path / "again"
        assert main(["gen-data", "--out", str(again), *GEN_ARGS]) == 0
        assert (again / "train.jsonl").read_bytes() == (data_dir / "train.jsonl").read_bytes()

    def test_infeasible(self, tmp_path, capsys):
        assert main(["gen-data", "--out", str(tmp_path), "--set", "vocab_size=20"]) == 1
        assert _error_line(capsys.readouterr().err).startswith('error code=config message="infeasible spec')


class TestTrainAndUse:
    def test_train_writes_run_directory(self, tmp_path, data_dir, tiny_cfg, capsys):
        out = _train(tmp_path, data_dir, tiny_cfg)
        for name in ("model.npz", "vocab.txt", "metrics.jsonl", "train.log", "config.txt"):
            assert (out / name).exists(), name
        assert "best_epoch=1" in capsys.readouterr().out
        events = [json.loads(line)["event"] for line in (out / "metrics.jsonl").read_text().splitlines()]
        assert "psp_epoch" in events and "epoch" in events

    def test_evaluate_and_predict(self, tmp_path, data_dir, tiny_cfg):
        run = _train(tmp_path, data_dir, tiny_cfg)
        test = data_dir / "test.jsonl"
        assert main(["evaluate", str(test), "--checkpoint", str(run / "model.npz"), "--out", str(tmp_path / "eval")]) == 0
        report = json.loads((tmp_path / "eval" / "report.json").read_text())
        assert report["n_dialogues"] == 4
        assert 0.0 <= report["all"]["f1"] <= 1.0
        assert (tmp_path / "eval" / "report.txt").read_text().startswith("dialogues: 4")

        pred_path = tmp_path / "pred.jsonl"
        assert main(["predict", str(test), "--checkpoint", str(run / "model.npz"), "--out", str(pred_path)]) == 0
        preds = load_corpus(pred_path)
        gold = load_corpus(test)
        assert [d.dialogue_id for d in preds] == [d.dialogue_id for d in gold]
        assert all(p.utterances == g.utterances and p.predicate == g.predicate for p, g in zip(preds, gold))

    def test_inspect_graph(self, tmp_path, data_dir, tiny_cfg, capsys):
        run = _train(tmp_path, data_dir, tiny_cfg)
        capsys.readouterr()
        assert main(["inspect-graph", "--checkpoint", str(run / "model.npz"), "--dialogue", str(data_dir / "test.jsonl")]) == 0
        lines = capsys.readouterr().out.splitlines()
        k = int(lines[0].split("K=")[1].split()[0])
        start = lines.index("E_pruned") + 2
        rows = lines[start : start + k]
        assert len(rows) == k
        for row in rows:
            assert abs(float(row.split()[-1]) - 1.0) < 1e-6

    def test_inspect_graph_without_pruning(self, tmp_path, data_dir, tiny_cfg, capsys):
        run = _train(tmp_path, data_dir, tiny_cfg, "--no-prune")
        dump = tmp_path / "graph.txt"
        argv = ["inspect-graph", "--checkpoint", str(run / "model.npz"), "--dialogue", str(data_dir / "dev.jsonl"), "--out", str(dump)]
        assert main(argv) == 0
        assert PRUNING_DISABLED in dump.read_text().splitlines()

    def test_psp_pretrain_then_init(self, tmp_path, data_dir, tiny_cfg, capsys):
        cfg_file = tmp_path / "psp.txt"
        write_config_file(tiny_cfg.replace(train_path=str(data_dir / "train.jsonl")), cfg_file)
        assert main(["psp-pretrain", "--config", str(cfg_file), "--out", str(tmp_path / "psp")]) == 0
        assert "accuracy=" in capsys.readouterr().out
        out = tmp_path / "warm"
        assert main(["train", "--config", str(cfg_file), "--init", str(tmp_path / "psp" / "model.npz"), "--out", str(out)]) == 0
        assert (out / "model.npz").exists()


class TestEvaluatePassthrough:
    def test_gold_against_itself(self, data_dir, tmp_path):
        assert main(["evaluate", str(data_dir / "dev.jsonl"), "--gold-passthrough", "--out", str(tmp_path / "rep")]) == 0
        report = json.loads((tmp_path / "rep" / "report.json").read_text())
        assert report["all"]["f1"] == 1.0

    def test_needs_checkpoint(self, data_dir, capsys):
        assert main(["evaluate", str(data_dir / "dev.jsonl")]) == 1
        assert _error_line(capsys.readouterr().err).startswith("error code=config ")


class TestDiagnostics:
    def test_unknown_config_key(self, tmp_path, data_dir, capsys):
        argv = ["train", "--train", str(data_dir / "train.jsonl"), "--set", "bogus=1", "--out", str(tmp_path / "r")]
        assert main(argv) == 1
        assert _error_line(capsys.readouterr().err) == 'error code=config message="unknown config key(s): bogus"'

    def test_corpus_error_names_line(self, tmp_path, pair_corpus, capsys):
        path = tmp_path / "bad.jsonl"
        save_corpus(pair_corpus, path, with_meta=False)
        lines = path.read_text().splitlines()
        rec = json.loads(lines[1])
        rec["predicate"] = {"utt": 0, "idx": 1}
        path.write_text(lines[0] + "\n" + json.dumps(rec) + "\n")
        assert main(["evaluate", str(path), "--gold-passthrough"]) == 1
        line = _error_line(capsys.readouterr().err)
        assert line.startswith("error code=corpus ")
        assert "bad.jsonl:2" in line

    def test_missing_checkpoint(self, data_dir, tmp_path, capsys):
        assert main(["predict", str(data_dir / "dev.jsonl"), "--checkpoint", str(tmp_path / "no.npz"), "--out", str(tmp_path / "p.jsonl")]) == 1
        assert _error_line(capsys.readouterr().err).startswith("error code=checkpoint ")

    def test_unexpected_exception_is_internal(self, tmp_path, monkeypatch, capsys):
        from polar.commands import gen_data

        def explode(args):
            raise RuntimeError("boom")

        monkeypatch.setattr(gen_data, "run", explode)
        assert main(["gen-data", "--out", str(tmp_path)]) == 1
        assert _error_line(capsys.readouterr().err) == 'error code=internal message="RuntimeError: boom"'

    def test_warm_start_rejects_other_speaker_channel(self, tmp_path, data_dir, tiny_cfg, capsys):
        cfg_file = tmp_path / "psp.txt"
        write_config_file(tiny_cfg.replace(train_path=str(data_dir / "train.jsonl")), cfg_file)
        assert main(["psp-pretrain", "--config", str(cfg_file), "--spk-label", "--out", str(tmp_path / "psp")]) == 0
        init = str(tmp_path / "psp" / "model.npz")
        assert main(["train", "--config", str(cfg_file), "--init", init, "--out", str(tmp_path / "warm")]) == 1
        line = _error_line(capsys.readouterr().err)
        assert line.startswith("error code=checkpoint ") and "spk_label" in line
        assert main(["train", "--config", str(cfg_file), "--spk-label", "--init", init, "--out", str(tmp_path / "ok")]) == 0


class TestLogLevel:
    def test_global_level_reaches_train_log(self, tmp_path, data_dir, tiny_cfg):
        cfg_file = tmp_path / "run.txt"
        write_config_file(tiny_cfg.replace(train_path=str(data_dir / "train.jsonl")), cfg_file)
        out = tmp_path / "quiet"
        assert main(["--log-level", "WARNING", "train", "--config", str(cfg_file), "--out", str(out)]) == 0
        assert "INFO" not in (out / "train.log").read_text()

    def test_config_level_wins_when_set(self, tmp_path, data_dir, tiny_cfg):
        cfg_file = tmp_path / "run.txt"
        write_config_file(tiny_cfg.replace(train_path=str(data_dir / "train.jsonl"), log_level="INFO"), cfg_file)
        out = tmp_path / "loud"
        assert main(["--log-level", "WARNING", "train", "--config", str(cfg_file), "--out", str(out)]) == 0
        assert "epoch 1:" in (out / "train.log").read_text()
