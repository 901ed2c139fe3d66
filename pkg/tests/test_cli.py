"""CLI verbs, exit codes, and file round-trips."""

import json

import pytest

from nflat.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Generated corpus plus a trained tiny checkpoint, shared by tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    code = main(
        [
            "gen-data", "--out", str(data), "--seed", "3",
            "--train-sentences", "24", "--dev-sentences", "8",
            "--test-sentences", "8", "--vocab-size", "40",
            "--distractors", "10", "--max-len", "20",
        ]
    )
    assert code == 0
    cfg = root / "tiny.cfg"
    cfg.write_text(
        "d_model=16\nheads=4\nepochs=3\nbatch_size=8\npatience=50\n"
        "char_embed_dropout=0.1\nattn_dropout=0.0\nfc_dropout1=0.0\n"
        "fc_dropout2=0.0\nword_embed_dropout=0.0\nseed=2\n",
        encoding="utf-8",
    )
    run = root / "run"
    code = main(
        [
            "train", "--config", str(cfg),
            "--train", str(data / "train.conll"),
            "--dev", str(data / "dev.conll"),
            "--lexicon", str(data / "lexicon.txt"),
            "--out", str(run), "--quiet",
        ]
    )
    assert code == 0
    return root


class TestUsageErrors:
    def test_no_arguments_exit_1(self, capsys):
        assert main([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_unknown_verb_exit_1(self):
        assert main(["frobnicate"]) == 1

    def test_missing_required_flag_exit_1(self):
        assert main(["match", "--text", "abc"]) == 1

    def test_conflicting_predict_flags_exit_1(self, workspace):
        ckpt = str(workspace / "run" / "checkpoint.npz")
        assert main(["predict", "--checkpoint", ckpt]) == 1
        assert (
            main(
                ["predict", "--checkpoint", ckpt, "--text", "ab", "--input", "x"]
            )
            == 1
        )


class TestDataErrors:
    def test_missing_lexicon_exit_2(self, capsys):
        assert main(["match", "--lexicon", "/nonexistent", "--text", "ab"]) == 2
        assert "error" in capsys.readouterr().err

    def test_bad_config_exit_2(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("mystery_knob=1\n", encoding="utf-8")
        assert main(["match", "--lexicon", str(bad), "--text", "a",
                     "--config", str(bad)]) == 2

    def test_bad_checkpoint_exit_2(self, tmp_path):
        junk = tmp_path / "junk.npz"
        junk.write_text("not an npz", encoding="utf-8")
        assert main(["eval", "--checkpoint", str(junk), "--data", str(junk)]) == 2


class TestMatchVerb:
    def test_example_output(self, tmp_path, capsys):
        lex = tmp_path / "lex.txt"
        lex.write_text("ab\nbc\ncab\n", encoding="utf-8")
        assert main(["match", "--lexicon", str(lex), "--text", "abcab"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines == ["ab 1 2", "bc 2 3", "cab 3 5", "ab 4 5"]


class TestStatsVerb:
    def test_summary_lines(self, workspace, capsys):
        code = main(
            [
                "stats",
                "--lexicon", str(workspace / "data" / "lexicon.txt"),
                "--data", str(workspace / "data" / "train.conll"),
            ]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "char length avg" in out
        assert "matched length max" in out


class TestTrainArtifacts:
    def test_checkpoint_and_metrics_exist(self, workspace):
        run = workspace / "run"
        assert (run / "checkpoint.npz").exists()
        lines = (run / "metrics.jsonl").read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        assert header["config"]["d_model"] == 16
        epoch0 = json.loads(lines[1])
        assert {"epoch", "loss", "dev_f1", "lr", "wall_seconds"} <= set(epoch0)

    def test_eval_runs_on_checkpoint(self, workspace, capsys):
        code = main(
            [
                "eval",
                "--checkpoint", str(workspace / "run" / "checkpoint.npz"),
                "--data", str(workspace / "data" / "test.conll"),
            ]
        )
        assert code == 0
        assert "precision" in capsys.readouterr().out


class TestPredictVerb:
    def test_text_mode_tab_separated(self, workspace, capsys):
        code = main(
            [
                "predict",
                "--checkpoint", str(workspace / "run" / "checkpoint.npz"),
                "--text", "一二三四五",
            ]
        )
        assert code == 0
        lines = [l for l in capsys.readouterr().out.splitlines() if l]
        assert len(lines) == 5
        for line in lines:
            ch, tag = line.split("\t")
            assert len(ch) == 1 and tag

    def test_output_reparses_as_dataset(self, workspace, tmp_path):
        out = tmp_path / "pred.conll"
        code = main(
            [
                "predict",
                "--checkpoint", str(workspace / "run" / "checkpoint.npz"),
                "--input", str(workspace / "data" / "test.conll"),
                "--out", str(out),
            ]
        )
        assert code == 0
        from nflat.data import read_conll

        pred = read_conll(out, require_labels=True)
        gold = read_conll(workspace / "data" / "test.conll")
        assert [p.chars for p in pred] == [g.chars for g in gold]
        # the eval verb accepts the predict output without error
        code = main(
            [
                "eval",
                "--checkpoint", str(workspace / "run" / "checkpoint.npz"),
                "--data", str(out),
            ]
        )
        assert code == 0


class TestBenchVerb:
    def test_csv_written(self, tmp_path, capsys):
        out = tmp_path / "bench.csv"
        code = main(
            [
                "bench", "--lengths", "16,32", "--reps", "1",
                "--d-model", "8", "--heads", "2", "--out", str(out),
            ]
        )
        assert code == 0
        text = out.read_text(encoding="utf-8")
        assert text.startswith("model,length,m,cells,peak_bytes,sec_per_1k,status")
        assert text.count("\n") == 5  # header + 2 lengths x 2 models

    def test_bad_lengths_exit_1(self, tmp_path):
        assert (
            main(["bench", "--lengths", "abc", "--out", str(tmp_path / "x.csv")])
            == 1
        )
