"""Command-line interface: exit codes, file outputs, help text."""

import json

import numpy as np
import pytest

from flownids.cli import RUN_DIR_ENV, build_parser, main
from flownids.serialize import load_checkpoint, load_dataset


def write_generic_csv(path, counts=(60, 20), f=4, spread=3.0, seed=0):
    rng = np.random.default_rng(seed)
    lines = [",".join([f"x{i}" for i in range(f)] + ["label"])]
    for cls, n in enumerate(counts):
        for _ in range(n):
            row = rng.normal(loc=spread * cls, size=f)
            lines.append(",".join(repr(float(v)) for v in row) +
                         f",class{cls}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture()
def corpus(tmp_path):
    return write_generic_csv(tmp_path / "flows.csv")


class TestExitCodes:
    def test_no_arguments_prints_help(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err.lower()

    def test_unknown_flag_is_usage_error(self, capsys):
        rc = main(["inspect", "--bogus", "x"])
        assert rc == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_command_is_usage_error(self):
        assert main(["frobnicate"]) == 1

    def test_missing_input_file_is_data_error(self, tmp_path, capsys):
        rc = main(["preprocess", "--dataset", "generic",
                   "--input", str(tmp_path / "nope.csv"),
                   "--out", str(tmp_path / "o.bin")])
        assert rc == 2
        assert "not found" in capsys.readouterr().err

    def test_truncated_container_is_data_error(self, tmp_path, corpus, capsys):
        out = tmp_path / "train.bin"
        assert main(["preprocess", "--dataset", "generic", "--input",
                     str(corpus), "--out", str(out)]) == 0
        blob = out.read_bytes()
        broken = tmp_path / "broken.bin"
        broken.write_bytes(blob[: len(blob) // 2])
        rc = main(["inspect", str(broken)])
        assert rc == 2
        assert "offset" in capsys.readouterr().err

    def test_bad_smote_policy_is_usage_error(self, tmp_path, corpus):
        out = tmp_path / "train.bin"
        main(["preprocess", "--dataset", "generic", "--input", str(corpus),
              "--out", str(out)])
        rc = main(["smote", "--data", str(out),
                   "--out", str(tmp_path / "b.bin"),
                   "--smote-policy", "wat"])
        assert rc == 1


class TestPreprocess:
    def test_writes_train_and_test(self, tmp_path, corpus):
        train, test = tmp_path / "tr.bin", tmp_path / "te.bin"
        rc = main(["preprocess", "--dataset", "generic", "--input",
                   str(corpus), "--out", str(train), "--test-out", str(test),
                   "--test-fraction", "0.25", "--seed", "3"])
        assert rc == 0
        c_tr, c_te = load_dataset(train), load_dataset(test)
        assert len(c_tr.table) == 60
        assert len(c_te.table) == 20
        assert c_tr.table.class_names == ("class0", "class1")
        # train columns standardized against the fitted transform
        assert np.max(np.abs(c_tr.table.features.mean(axis=0))) < 1e-9

    def test_summary_on_stderr(self, tmp_path, corpus, capsys):
        main(["preprocess", "--dataset", "generic", "--input", str(corpus),
              "--out", str(tmp_path / "o.bin")])
        summary = json.loads(capsys.readouterr().err)
        assert summary["rows_parsed"] == 80
        assert summary["n_train"] + summary["n_test"] == 80

    def test_apply_from_reuses_transforms(self, tmp_path, corpus):
        donor = tmp_path / "donor.bin"
        main(["preprocess", "--dataset", "generic", "--input", str(corpus),
              "--out", str(donor)])
        more = write_generic_csv(tmp_path / "more.csv", counts=(10, 10),
                                 seed=9)
        out = tmp_path / "scored.bin"
        rc = main(["preprocess", "--dataset", "generic", "--input", str(more),
                   "--apply-from", str(donor), "--out", str(out)])
        assert rc == 0
        c_donor, c_out = load_dataset(donor), load_dataset(out)
        assert c_out.standardizer.means.tobytes() == \
            c_donor.standardizer.means.tobytes()
        assert len(c_out.table) == 20

    def test_explicit_label_map(self, tmp_path, corpus):
        lm = tmp_path / "labels.map"
        lm.write_text("classes = Benign, Attack\nclass0 = Benign\n"
                      "class1 = Attack\n", encoding="utf-8")
        out = tmp_path / "o.bin"
        rc = main(["preprocess", "--dataset", "generic", "--input",
                   str(corpus), "--label-map", str(lm), "--out", str(out)])
        assert rc == 0
        assert load_dataset(out).table.class_names == ("Benign", "Attack")


class TestFullWorkflow:
    def test_preprocess_smote_train_evaluate_inspect(self, tmp_path, corpus,
                                                     capsys):
        train, test = tmp_path / "tr.bin", tmp_path / "te.bin"
        assert main(["preprocess", "--dataset", "generic", "--input",
                     str(corpus), "--out", str(train), "--test-out",
                     str(test), "--test-fraction", "0.25"]) == 0

        balanced = tmp_path / "balanced.bin"
        assert main(["smote", "--data", str(train), "--out", str(balanced),
                     "--smote-k", "3", "--seed", "0"]) == 0
        hist = load_dataset(balanced).table.histogram()
        assert hist[0] == hist[1]

        run_dir = tmp_path / "run"
        assert main(["train", "--data", str(balanced), "--out-dir",
                     str(run_dir), "--epochs", "3", "--hidden", "8",
                     "--seq-len", "1", "--dropout", "0.0",
                     "--batch-size", "32"]) == 0
        assert (run_dir / "checkpoint.bin").exists()
        assert (run_dir / "history.csv").exists()
        assert (run_dir / "run_config.txt").exists()
        history = (run_dir / "history.csv").read_text()
        assert history.splitlines()[0] == "epoch,loss,accuracy"
        assert len(history.splitlines()) == 4

        capsys.readouterr()
        eval_dir = tmp_path / "eval"
        assert main(["evaluate", "--model", str(run_dir / "checkpoint.bin"),
                     "--data", str(test), "--out-dir", str(eval_dir)]) == 0
        metrics = json.loads((eval_dir / "metrics.json").read_text())
        assert set(metrics["per_class"]) == {"class0", "class1"}
        assert (eval_dir / "confusion.csv").exists()
        assert "macro" in capsys.readouterr().err

        capsys.readouterr()
        assert main(["inspect", str(run_dir / "checkpoint.bin")]) == 0
        info = json.loads(capsys.readouterr().out)
        assert info["kind"] == "checkpoint"
        assert len(info["tensors"]) == 10

    def test_train_reads_config_file(self, tmp_path, corpus):
        train = tmp_path / "tr.bin"
        main(["preprocess", "--dataset", "generic", "--input", str(corpus),
              "--out", str(train)])
        cfg = tmp_path / "run.txt"
        cfg.write_text("epochs = 2\nhidden_dim = 8\nseq_len = 1\n"
                       "dropout_rate = 0.0\nbatch_size = 64\n",
                       encoding="utf-8")
        run_dir = tmp_path / "run"
        assert main(["train", "--data", str(train), "--config", str(cfg),
                     "--out-dir", str(run_dir)]) == 0
        saved = (run_dir / "run_config.txt").read_text()
        assert "epochs = 2" in saved
        # CLI flag overrides config file
        run2 = tmp_path / "run2"
        assert main(["train", "--data", str(train), "--config", str(cfg),
                     "--epochs", "1", "--out-dir", str(run2)]) == 0
        assert "epochs = 1" in (run2 / "run_config.txt").read_text()

    def test_run_dir_env_fallback(self, tmp_path, corpus, monkeypatch):
        train = tmp_path / "tr.bin"
        main(["preprocess", "--dataset", "generic", "--input", str(corpus),
              "--out", str(train)])
        env_dir = tmp_path / "envrun"
        monkeypatch.setenv(RUN_DIR_ENV, str(env_dir))
        assert main(["train", "--data", str(train), "--epochs", "1",
                     "--hidden", "8", "--seq-len", "1",
                     "--batch-size", "64"]) == 0
        assert (env_dir / "checkpoint.bin").exists()


class TestExperimentCommand:
    def test_three_arm_smoke(self, tmp_path, corpus, capsys):
        out = tmp_path / "exp"
        rc = main(["experiment", "--dataset", "generic", "--input",
                   str(corpus), "--out-dir", str(out), "--epochs", "2",
                   "--hidden", "8", "--seq-len", "1", "--dropout", "0.0",
                   "--batch-size", "32", "--test-fraction", "0.25"])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["arms"] == ["no_smote_ce", "smote_ce", "smote_cfcl"]
        for arm in manifest["arms"]:
            assert (out / f"{arm}_metrics.json").exists()

    def test_arm_subset(self, tmp_path, corpus):
        out = tmp_path / "exp"
        rc = main(["experiment", "--dataset", "generic", "--input",
                   str(corpus), "--out-dir", str(out), "--epochs", "1",
                   "--hidden", "8", "--seq-len", "1", "--batch-size", "64",
                   "--arms", "no_smote_ce"])
        assert rc == 0
        assert (out / "no_smote_ce_metrics.json").exists()
        assert not (out / "smote_ce_metrics.json").exists()


class TestHelpText:
    def test_every_flag_documented_in_help(self):
        parser = build_parser()
        sub_actions = [a for a in parser._actions
                       if hasattr(a, "choices") and a.choices]
        assert sub_actions
        for name, sub in sub_actions[0].choices.items():
            text = sub.format_help()
            for action in sub._actions:
                for opt in action.option_strings:
                    assert opt in text, (name, opt)

    def test_top_level_lists_commands(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for cmd in ("preprocess", "smote", "train", "evaluate",
                    "experiment", "inspect"):
            assert cmd in out

    def test_train_help_covers_all_knobs(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        for flag in ("--data", "--valid-data", "--out-dir", "--hidden",
                     "--seq-len", "--dropout", "--loss", "--gamma", "--alpha",
                     "--smote", "--smote-k", "--smote-policy", "--lr",
                     "--beta1", "--beta2", "--eps", "--clip-norm",
                     "--batch-size", "--epochs", "--seed", "--no-shuffle",
                     "--config"):
            assert flag in out, flag
