import json

import pytest

from seqlm import autodiff as ad
from seqlm import cli, gradcheck
from seqlm.errors import NumericError
from seqlm.serialize import load_model
from seqlm.synthetic import tagging_text

SMALL_CFG = """\
hidden = 8
embedding_dim = 6
char_embedding_dim = 3
char_hidden = 3
combined_dim = 5
lm_projection = 4
batch_size = 4
lm_k = 30
max_epochs = {epochs}
patience = {patience}
seeds = 5
output_mode = crf
dev_metric = accuracy
"""


@pytest.fixture
def files(tmp_path):
    (tmp_path / "train.txt").write_text(tagging_text(n_sentences=16, vocab_size=12, seed=1))
    (tmp_path / "dev.txt").write_text(tagging_text(n_sentences=6, vocab_size=12, seed=2))
    (tmp_path / "run.cfg").write_text(SMALL_CFG.format(epochs=3, patience=5))
    return tmp_path


def run(*argv):
    return cli.main([str(a) for a in argv])


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


def test_train_writes_loadable_model(files, capsys):
    d = files
    assert run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
               "--model", d / "m.bin") == 0
    tagger = load_model(d / "m.bin")
    assert tagger.config.hidden == 8 and tagger.config.output_mode == "crf"
    records = read_jsonl(d / "m.bin.history.jsonl")
    assert [r["type"] for r in records].count("epoch") == 3
    out = capsys.readouterr().out
    assert '"type": "mean"' in out and "ACC" in out


def test_missing_dev_is_usage_error_and_writes_nothing(files, capsys):
    d = files
    before = set(d.iterdir())
    code = run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "nope.txt",
               "--model", d / "m.bin")
    assert code == 1 and set(d.iterdir()) == before
    err = capsys.readouterr().err.strip()
    assert len(err.splitlines()) == 1 and "[cli]" in err and "--dev" in err


def test_seed_flag_is_deterministic(files):
    d = files
    for name in ("a", "b"):
        assert run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
                   "--seed", 13, "--model", d / f"{name}.bin", "--out", d / f"{name}.jsonl") == 0
    assert (d / "a.jsonl").read_bytes() == (d / "b.jsonl").read_bytes()
    assert (d / "a.bin").read_bytes() == (d / "b.bin").read_bytes()
    assert all(r.get("seed", 13) == 13 for r in read_jsonl(d / "a.jsonl"))


def test_multiple_seeds_write_one_model_each(files):
    d = files
    (d / "run.cfg").write_text(SMALL_CFG.format(epochs=1, patience=5).replace("seeds = 5", "seeds = 1, 2"))
    assert run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
               "--model", d / "m.bin") == 0
    assert (d / "m.seed1.bin").exists() and (d / "m.seed2.bin").exists() and not (d / "m.bin").exists()
    summary = read_jsonl(d / "m.bin.history.jsonl")[-1]
    assert summary["type"] == "mean" and summary["seeds"] == [1, 2]


def test_flags_override_config(files):
    d = files
    assert run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
               "--model", d / "m.bin", "--gamma", 0.3, "--no-char", "--no-dropout", "--metric", "accuracy") == 0
    c = load_model(d / "m.bin").config
    assert c.gamma == 0.3 and not c.use_char and not c.use_dropout


def test_evaluate_overfit_model_scores_one(files, capsys):
    d = files
    (d / "run.cfg").write_text(SMALL_CFG.format(epochs=60, patience=60))
    assert run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "train.txt",
               "--no-dropout", "--model", d / "m.bin") == 0
    capsys.readouterr()
    assert run("evaluate", "--model", d / "m.bin", "--data", d / "train.txt", "--out", d / "eval.jsonl") == 0
    rec = read_jsonl(d / "eval.jsonl")[0]
    assert rec["metric"] == "accuracy" and rec["score"] == 1.0
    assert "100.00" in capsys.readouterr().out


def test_evaluate_warns_on_metric_mismatch(files, caplog):
    d = files
    run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt", "--model", d / "m.bin")
    with caplog.at_level("WARNING"):
        assert run("evaluate", "--model", d / "m.bin", "--data", d / "dev.txt", "--metric", "f05") == 0
    assert any("differs" in r.message for r in caplog.records)


def test_evaluate_unknown_label_is_data_error(files, capsys):
    d = files
    run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt", "--model", d / "m.bin")
    (d / "odd.txt").write_text("word NEWLABEL\n")
    assert run("evaluate", "--model", d / "m.bin", "--data", d / "odd.txt") == 2
    assert "[eval]" in capsys.readouterr().err


def test_corrupted_model(files, capsys):
    d = files
    (d / "bad.bin").write_bytes(b"SEQLM\n\x05\x00")
    assert run("evaluate", "--model", d / "bad.bin", "--data", d / "dev.txt") == 2
    assert "[model]" in capsys.readouterr().err


def test_predict(files, capsys):
    d = files
    run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt", "--model", d / "m.bin")
    (d / "raw.txt").write_text("unseenword X\nanother Y\n")
    assert run("predict", "--model", d / "m.bin", "--data", d / "raw.txt", "--out", d / "pred.txt") == 0
    lines = (d / "pred.txt").read_text().splitlines()
    labels = load_model(d / "m.bin").vocabs.labels
    assert [ln.split("\t")[0] for ln in lines[:2]] == ["unseenword", "another"]
    assert all(ln.split("\t")[2] in labels for ln in lines[:2])


def test_usage_and_data_errors(files, capsys):
    d = files
    assert run("frobnicate") == 1
    assert run("train", "--train", d / "train.txt") == 1
    (d / "broken.txt").write_text("onlyonecolumn\n")
    assert run("train", "--config", d / "run.cfg", "--train", d / "broken.txt", "--dev", d / "dev.txt",
               "--model", d / "m.bin") == 2
    (d / "bad.cfg").write_text("nonsense = 3\n")
    assert run("train", "--config", d / "bad.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
               "--model", d / "m.bin") == 1
    assert not (d / "m.bin").exists()


def test_numeric_error_exit_code(files, monkeypatch):
    d = files

    def explode(*a, **k):
        raise NumericError("non-finite value produced by tanh")

    monkeypatch.setattr(cli, "run_seeds", explode)
    assert run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
               "--model", d / "m.bin") == 3


def test_ablate(files, capsys):
    d = files
    assert run("ablate", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
               "--test", d / "dev.txt", "--out", d / "ablate.jsonl") == 0
    table = capsys.readouterr().out.splitlines()
    rows = [ln for ln in table if ln.split("|")[0].strip() in ("Baseline", "+ dropout", "+ LMcost")]
    assert len(rows) == 3 and "-  " not in "".join(rows)
    records = read_jsonl(d / "ablate.jsonl")
    curves = {(r["system"], r["epoch"]) for r in records if r["type"] == "epoch"}
    assert {s for s, _ in curves} == {"Baseline", "+ dropout", "+ LMcost"}
    means = {r["system"]: r for r in records if r["type"] == "mean"}
    assert means["Baseline"]["gamma"] == 0.0 and not means["Baseline"]["use_dropout"]
    assert means["+ LMcost"]["gamma"] == 0.1 and means["+ LMcost"]["use_dropout"]

    # the baseline row is the same run as train with matching flags
    assert run("train", "--config", d / "run.cfg", "--train", d / "train.txt", "--dev", d / "dev.txt",
               "--test", d / "dev.txt", "--no-dropout", "--gamma", 0, "--model", d / "b.bin") == 0
    base = [r for r in read_jsonl(d / "b.bin.history.jsonl") if r["type"] == "epoch"]
    ab = [{k: v for k, v in r.items() if k != "system"} for r in records
          if r["type"] == "epoch" and r["system"] == "Baseline"]
    assert base == ab


def _corrupt(orig, E, i):
    """row_lookup whose backward rule sends twice the true gradient."""
    out = orig(E, i)
    if out.parents:
        parent, rule = out.parents[0]
        out.parents = ((parent, lambda g, gE: rule(2.0 * g, gE)),)
    return out


def test_gradcheck_names_corrupted_group(monkeypatch, capsys):
    orig = ad.row_lookup
    monkeypatch.setattr(ad, "row_lookup", lambda E, i: _corrupt(orig, E, i))
    monkeypatch.setattr(gradcheck, "run_suite", lambda: {("softmax", 0.0): gradcheck.check_model("softmax", 0.0)})
    assert run("gradcheck") == 4
    err = capsys.readouterr().err
    assert "word_emb" in err and "char_emb" in err and "fw_Wx" not in err
