"""Command-line interface tests: exit codes, outputs, self-consumption."""

import json
from pathlib import Path

import pytest

from claimgraph.cli import main
from claimgraph.corpus import load_corpus, parse_corpus, serialize_corpus
from claimgraph.datagen import build_toy_corpus
from claimgraph.metrics import MetricsReport

DATA = Path(__file__).resolve().parent.parent / "data"
STATS = str(DATA / "stats_corpus.jsonl")
TOY = str(DATA / "toy_corpus.jsonl")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestUsage:
    def test_unknown_command_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["stats", "--corpus", STATS, "--bogus"])
        assert exc.value.code == 2

    def test_missing_file_exits_1(self, capsys):
        code, _, err = run(capsys, "stats", "--corpus", "no-such-file.jsonl")
        assert code == 1 and "no such file" in err


class TestStats:
    def test_totals_line(self, capsys):
        code, out, _ = run(capsys, "stats", "--corpus", STATS)
        assert code == 0
        assert "entities 5548 / relations 5346 / attributes 1844" in out
        assert "words 20070" in out

    def test_json_self_consumption(self, capsys):
        code, out, _ = run(capsys, "stats", "--corpus", STATS, "--json")
        assert code == 0
        payload = json.loads(out)
        assert payload["total_labels"] == 12738
        assert payload["per_label"]["entities"]["factor"] == 2756
        assert payload["densities"]["total"] == 63.47


class TestValidate:
    def test_valid_corpus_exit_0(self, capsys):
        code, out, _ = run(capsys, "validate", "--corpus", TOY)
        assert code == 0 and "0 errors" in out

    def test_self_cycle_exit_1(self, capsys, tmp_path):
        bad = tmp_path / "bad.jsonl"
        record = {"id": "b1", "source": "other", "split": "train",
                  "tokens": ["a", "b"],
                  "entities": [{"type": "factor", "start": 0, "end": 1},
                               {"type": "factor", "start": 1, "end": 2}],
                  "relations": [{"type": "subtype", "head": 1, "tail": 1}],
                  "attributes": []}
        bad.write_text(json.dumps(record) + "\n")
        code, out, _ = run(capsys, "validate", "--corpus", str(bad))
        assert code == 1
        assert "self-cycle" in out


class TestFilter:
    def test_matches_and_json(self, capsys, tmp_path):
        raw = tmp_path / "raw.txt"
        raw.write_text("Smoking leads to cancer\nThe sky is blue\nREDUCE the dose\n")
        code, out, _ = run(capsys, "filter", "--input", str(raw), "--json")
        assert code == 0
        rows = json.loads(out)
        assert [r["index"] for r in rows] == [0, 2]
        assert rows[0]["keywords"] == ["leads to"]


class TestEncodeDecode:
    def test_roundtrip_via_files(self, capsys, tmp_path):
        enc = tmp_path / "enc.jsonl"
        dec = tmp_path / "dec.jsonl"
        code, _, _ = run(capsys, "encode-attrs", "--corpus", TOY, "--out", str(enc))
        assert code == 0
        first = json.loads(enc.read_text().splitlines()[0])
        assert first["attributes"] == []
        assert any("|" in e["type"] for e in first["entities"])
        code, _, _ = run(capsys, "decode-attrs", "--corpus", str(enc), "--out", str(dec))
        assert code == 0
        assert load_corpus(dec) == load_corpus(TOY)


class TestSplit:
    def test_split_files(self, capsys, tmp_path):
        prefix = str(tmp_path / "part")
        code, out, _ = run(capsys, "split", "--corpus", STATS,
                           "--out-prefix", prefix, "--seed", "3")
        assert code == 0
        assert len(load_corpus(prefix + ".train.jsonl")) == 721
        assert len(load_corpus(prefix + ".val.jsonl")) == 80
        assert len(load_corpus(prefix + ".test.jsonl")) == 100


@pytest.fixture(scope="module")
def toy_checkpoint(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    ckpt = tmp / "toy.ckpt"
    report = tmp / "report.json"
    code = main(["train", "--corpus", TOY, "--out", str(ckpt),
                 "--report", str(report), "--epochs", "200",
                 "--learning-rate", "5e-3", "--dropout", "0", "--dim", "32",
                 "--max-span-size", "6", "--seed", "7"])
    assert code == 0
    return tmp, ckpt, report


class TestTrainEvalPredict:
    def test_report_written(self, toy_checkpoint):
        _, _, report = toy_checkpoint
        payload = json.loads(report.read_text())
        assert len(payload["epochs"]) == 200

    def test_eval_json_parses_as_report(self, toy_checkpoint, capsys):
        _, ckpt, _ = toy_checkpoint
        code, out, _ = run(capsys, "eval", "--gold", TOY,
                           "--checkpoint", str(ckpt), "--json")
        assert code == 0
        report = MetricsReport.from_json(json.loads(out))
        assert report.micro["entities"].f1 >= 0.95

    def test_predict_output_parses_as_corpus(self, toy_checkpoint, capsys, tmp_path):
        _, ckpt, _ = toy_checkpoint
        out_path = tmp_path / "pred.jsonl"
        code, _, _ = run(capsys, "predict", "--checkpoint", str(ckpt),
                         "--corpus", TOY, "--out", str(out_path))
        assert code == 0
        lines = out_path.read_text().splitlines()
        assert len(lines) == 20
        for line in lines:
            obj = json.loads(line)
            obj.setdefault("source", "other")
            obj.setdefault("split", "unlabeled")
            parse_corpus(json.dumps(obj).encode())

    def test_eval_against_prediction_file(self, toy_checkpoint, capsys, tmp_path):
        _, ckpt, _ = toy_checkpoint
        pred = tmp_path / "pred.jsonl"
        run(capsys, "predict", "--checkpoint", str(ckpt), "--corpus", TOY,
            "--out", str(pred))
        code, out, _ = run(capsys, "eval", "--gold", TOY, "--pred", str(pred))
        assert code == 0
        assert "micro" in out


class TestGradcheckCommand:
    def test_passes_at_tolerance(self, capsys):
        code, out, _ = run(capsys, "gradcheck", "--eps", "1e-4",
                           "--dim", "8", "--sentences", "1")
        assert code == 0
        assert "worst" in out

    def test_fails_at_impossible_tolerance(self, capsys):
        code, _, _ = run(capsys, "gradcheck", "--eps", "1e-4", "--dim", "8",
                         "--sentences", "1", "--tolerance", "1e-18")
        assert code == 1


class TestDeterminism:
    def test_train_seeded_twice_identical(self, capsys, tmp_path):
        outs = []
        for name in ("a.ckpt", "b.ckpt"):
            path = tmp_path / name
            code = main(["train", "--corpus", TOY, "--out", str(path),
                         "--epochs", "3", "--learning-rate", "5e-3",
                         "--dropout", "0.1", "--dim", "16",
                         "--max-span-size", "6", "--seed", "21"])
            capsys.readouterr()
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]
