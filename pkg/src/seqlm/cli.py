"""Command-line interface: train, evaluate, predict, ablate, gradcheck.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error,
4 verification failure.
"""

from __future__ import annotations

import argparse
import io
import logging
import os
import sys

from . import gradcheck
from .config import RunConfig, load_config
from .data import Corpus, encode_corpus, read_conll_file, write_conll
from .errors import SeqlmError
from .metrics import evaluate, format_table, to_jsonl
from .serialize import atomic_write, load_model, model_bytes
from .trainer import run_seeds

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3, 4

log = logging.getLogger("seqlm")


class UsageError(SeqlmError):
    exit_code = EXIT_USAGE
    module = "cli"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_run_flags(p):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--train", help="training data (column format)")
    p.add_argument("--dev", help="development data")
    p.add_argument("--test", help="test data")
    p.add_argument("--seed", type=int, help="train a single model with this seed")
    p.add_argument("--gamma", type=float, help="language-modeling loss weight")
    p.add_argument("--metric", choices=("f05", "entity_f1", "accuracy"), help="dev metric")
    p.add_argument("--no-char", action="store_true", help="disable the character component")
    p.add_argument("--no-dropout", action="store_true", help="disable embedding dropout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqlm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a model (one per configured seed)")
    _add_run_flags(p)
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--out", help="history records (JSON lines); default <model>.history.jsonl")

    p = sub.add_parser("evaluate", help="score a model on labelled data")
    p.add_argument("--model", required=True)
    p.add_argument("--data", "--test", dest="data", required=True)
    p.add_argument("--metric", choices=("f05", "entity_f1", "accuracy"))
    p.add_argument("--out", help="write the metric record here as well")

    p = sub.add_parser("predict", help="label data with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", "--test", dest="data", required=True)
    p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("ablate", help="baseline / +dropout / +LM comparison")
    _add_run_flags(p)
    p.add_argument("--out", help="records (JSON lines) incl. per-epoch dev curves")

    p = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    p.add_argument("--out", help="write per-group errors here (JSON lines)")
    return parser


def _require_files(*paths):
    for flag, path in paths:
        if not path:
            raise UsageError(f"{flag} is required")
        if not os.path.isfile(path):
            raise UsageError(f"{flag}: no such file: {path}")


def _run_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    changes = {}
    if args.gamma is not None:
        changes["gamma"] = args.gamma
    if args.metric:
        changes["dev_metric"] = args.metric
    if args.no_char:
        changes["use_char"] = False
    if args.no_dropout:
        changes["use_dropout"] = False
    if args.seed is not None:
        changes["seeds"] = (args.seed,)
    return config.replace(**changes) if changes else config


def _read(path, config: RunConfig, role: str) -> Corpus:
    return read_conll_file(path, config.token_column, config.label_column, role, config.iob1)


def _load_splits(args, config, need_test=False):
    files = [("--train", args.train), ("--dev", args.dev)]
    if args.config:
        files.insert(0, ("--config", args.config))
    if need_test or args.test:
        files.append(("--test", args.test))
    _require_files(*files)
    train_c = _read(args.train, config, "train")
    dev_c = _read(args.dev, config, "dev")
    test_c = _read(args.test, config, "test") if args.test else None
    return train_c, dev_c, test_c


def _seed_path(path: str, seed: int) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.seed{seed}{ext}"


def cmd_train(args) -> int:
    if args.config:
        _require_files(("--config", args.config))
    config = _run_config(args)
    train_c, dev_c, test_c = _load_splits(args, config)
    runs, summary = run_seeds(config, train_c, dev_c, test_c)

    records = []
    outputs = {}
    for run in runs:
        records.extend(run.history.to_records(seed=run.seed))
        records.append(run.record())
        path = args.model if len(runs) == 1 else _seed_path(args.model, run.seed)
        outputs[path] = model_bytes(run.tagger)
    records.append(summary)

    # every result is in memory before anything is written
    for path, data in outputs.items():
        with atomic_write(path) as fh:
            fh.write(data)
    with atomic_write(args.out or args.model + ".history.jsonl", "w") as fh:
        fh.write(to_jsonl(records))
    print(to_jsonl([summary]), end="")
    splits = {"dev": summary["dev"]}
    if "test" in summary:
        splits["test"] = summary["test"]
    print(format_table({"model": splits}, config.dev_metric))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _require_files(("--model", args.model), ("--data", args.data))
    tagger = load_model(args.model)
    config = tagger.config
    metric = args.metric or config.dev_metric
    if metric != config.dev_metric:
        log.warning("metric %s differs from the model's configured metric %s", metric, config.dev_metric)
    corpus = encode_corpus(_read(args.data, config, "test"), tagger.vocabs)
    record = evaluate(tagger.predict_corpus(corpus), corpus.label_strings(), metric, config.positive_label)
    if args.out:
        with atomic_write(args.out, "w") as fh:
            fh.write(to_jsonl([record]))
    print(to_jsonl([record]), end="")
    print(format_table({"model": {"data": record}}, metric))
    return EXIT_OK


def cmd_predict(args) -> int:
    _require_files(("--model", args.model), ("--data", args.data))
    tagger = load_model(args.model)
    config = tagger.config
    corpus = _read(args.data, config, "test")
    encoded = encode_corpus(corpus, tagger.vocabs, strict_labels=False)
    predicted = tagger.predict_corpus(encoded)
    buf = io.StringIO()
    write_conll(corpus, buf, predicted)
    if args.out:
        with atomic_write(args.out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


ABLATION_ROWS = ("Baseline", "+ dropout", "+ LMcost")


def cmd_ablate(args) -> int:
    if args.config:
        _require_files(("--config", args.config))
    config = _run_config(args)
    train_c, dev_c, test_c = _load_splits(args, config)
    systems = {
        "Baseline": config.replace(use_dropout=False, gamma=0.0),
        "+ dropout": config.replace(use_dropout=True, gamma=0.0),
        "+ LMcost": config.replace(use_dropout=True),
    }
    records, table = [], {}
    for name, cfg in systems.items():
        runs, summary = run_seeds(cfg, train_c, dev_c, test_c)
        for run in runs:
            records.extend(run.history.to_records(system=name, seed=run.seed))
            records.append({**run.record(), "system": name})
        records.append({**summary, "system": name, "gamma": cfg.gamma, "use_dropout": cfg.use_dropout})
        table[name] = {k: summary[k] for k in ("dev", "test") if k in summary}
    if args.out:
        with atomic_write(args.out, "w") as fh:
            fh.write(to_jsonl(records))
    print(format_table(table, config.dev_metric))
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = gradcheck.run_suite()
    records, failed = [], []
    for (mode, gamma), groups in results.items():
        for group, err in groups.items():
            ok = err < gradcheck.THRESHOLD
            records.append({"output_mode": mode, "gamma": gamma, "group": group,
                            "max_rel_error": err, "ok": ok})
            if not ok:
                failed.append(f"{mode}/gamma={gamma}/{group}")
        worst = max(groups.values())
        print(f"{mode:8s} gamma={gamma:<4} max_rel_error={worst:.3e}")
        for group, err in groups.items():
            print(f"    {group:14s} {err:.3e}{'' if err < gradcheck.THRESHOLD else '  FAIL'}")
    if args.out:
        with atomic_write(args.out, "w") as fh:
            fh.write(to_jsonl(records))
    if failed:
        print("seqlm: error [gradcheck]: threshold exceeded in " + ", ".join(failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "predict": cmd_predict,
            "ablate": cmd_ablate, "gradcheck": cmd_gradcheck}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except SeqlmError as exc:
        print(f"seqlm: error [{exc.module}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"seqlm: error [io]: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
