"""Token-level P/R/F-beta, CoNLL entity-level F1 and token accuracy."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import NamedTuple, Sequence

from .errors import LabelError, ShapeError


class Span(NamedTuple):
    start: int
    end: int
    type: str


@dataclass(frozen=True)
class MetricReport:
    precision: float
    recall: float
    f: float
    tp: int
    predicted: int
    gold: int
    beta: float = 1.0

    @classmethod
    def from_counts(cls, tp: int, predicted: int, gold: int, beta: float = 1.0) -> "MetricReport":
        p = tp / predicted if predicted else 0.0
        r = tp / gold if gold else 0.0
        return cls(p, r, fbeta(p, r, beta), tp, predicted, gold, beta)

    def to_dict(self) -> dict:
        return asdict(self)


def fbeta(precision: float, recall: float, beta: float) -> float:
    b2 = beta * beta
    denom = b2 * precision + recall
    if denom == 0:
        return 0.0
    return (1 + b2) * precision * recall / denom


def _check_shapes(pred, gold):
    if len(pred) != len(gold):
        raise ShapeError(f"{len(pred)} predicted sentences vs {len(gold)} gold")
    for i, (p, g) in enumerate(zip(pred, gold)):
        if len(p) != len(g):
            raise ShapeError(f"sentence {i}: {len(p)} predicted labels vs {len(g)} gold")


def token_prf(pred: Sequence[Sequence], gold: Sequence[Sequence], positive_label, beta: float = 0.5) -> MetricReport:
    """Precision/recall/F-beta over tokens carrying ``positive_label``."""
    _check_shapes(pred, gold)
    tp = n_pred = n_gold = 0
    for ps, gs in zip(pred, gold):
        for p, g in zip(ps, gs):
            is_p, is_g = p == positive_label, g == positive_label
            n_pred += is_p
            n_gold += is_g
            tp += is_p and is_g
    return MetricReport.from_counts(tp, n_pred, n_gold, beta)


def _split(label: str):
    if label == "O":
        return "O", None
    if len(label) > 2 and label[1] == "-" and label[0] in "BI":
        return label[0], label[2:]
    raise LabelError(f"label {label!r} is not in the BIO scheme")


def extract_spans(labels: Sequence[str], strict: bool = False) -> list[Span]:
    """Chunks of a BIO sequence.

    An ``I-X`` that does not continue an open ``X`` chunk starts a new one,
    as conlleval does; with ``strict=True`` it raises instead.
    """
    spans = []
    start = typ = None
    for i, lab in enumerate(labels):
        prefix, t = _split(lab)
        continues = prefix == "I" and typ == t
        if start is not None and not continues:
            spans.append(Span(start, i, typ))
            start = typ = None
        if prefix == "B" or (prefix == "I" and not continues):
            if prefix == "I" and strict:
                raise LabelError(f"position {i}: {lab} does not continue a {t} chunk")
            start, typ = i, t
    if start is not None:
        spans.append(Span(start, len(labels), typ))
    return spans


def entity_f1(pred: Sequence[Sequence[str]], gold: Sequence[Sequence[str]], strict: bool = False) -> MetricReport:
    """Micro-averaged exact-match chunk precision, recall and F1."""
    _check_shapes(pred, gold)
    tp = n_pred = n_gold = 0
    for ps, gs in zip(pred, gold):
        p_spans = set(extract_spans(ps, strict))
        g_spans = set(extract_spans(gs, strict))
        tp += len(p_spans & g_spans)
        n_pred += len(p_spans)
        n_gold += len(g_spans)
    return MetricReport.from_counts(tp, n_pred, n_gold, 1.0)


def accuracy(pred: Sequence[Sequence], gold: Sequence[Sequence]) -> float:
    _check_shapes(pred, gold)
    total = sum(len(g) for g in gold)
    if total == 0:
        return 0.0
    return sum(p == g for ps, gs in zip(pred, gold) for p, g in zip(ps, gs)) / total


def evaluate(pred, gold, metric: str, positive_label: str = "i") -> dict:
    """Compute ``metric`` and return a flat record; ``score`` is the value used for model selection."""
    if metric == "accuracy":
        acc = accuracy(pred, gold)
        return {"metric": metric, "accuracy": acc, "score": acc}
    if metric == "f05":
        report = token_prf(pred, gold, positive_label, beta=0.5)
    elif metric == "entity_f1":
        report = entity_f1(pred, gold)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return {"metric": metric, **report.to_dict(), "score": report.f}


def to_jsonl(records) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in records)


def format_table(rows: dict[str, dict[str, dict]], metric: str) -> str:
    """Human-readable results table: one row per system, P / R / F (or accuracy) per split.

    ``rows`` maps system name -> split name -> metric record (as from
    :func:`evaluate`, or a seed-averaged record with the same keys).
    """
    splits = []
    for per_split in rows.values():
        for s in per_split:
            if s not in splits:
                splits.append(s)
    cols = ["accuracy"] if metric == "accuracy" else ["precision", "recall", "f"]
    short = {"accuracy": "ACC", "precision": "P", "recall": "R", "f": "F0.5" if metric == "f05" else "F1"}
    name_w = max([len(n) for n in rows] + [6])
    head1 = " " * name_w + " | " + " | ".join(s.upper().center(8 * len(cols) - 1) for s in splits)
    head2 = " " * name_w + " | " + " | ".join(" ".join(short[c].rjust(7) for c in cols) for _ in splits)
    lines = [head1, head2, "-" * len(head2)]
    for name, per_split in rows.items():
        cells = []
        for s in splits:
            rec = per_split.get(s, {})
            cells.append(" ".join(f"{100 * rec[c]:7.2f}" if c in rec else "      -" for c in cols))
        lines.append(name.ljust(name_w) + " | " + " | ".join(cells))
    return "\n".join(lines)
