"""BiLSTM sequence labeler with forward/backward language-modeling heads.

Per token the network computes a word embedding, optionally gated together
with a character-level representation, runs a forward and a backward LSTM
over the sentence, and maps the concatenated states through a tanh layer
to label scores (softmax or CRF). During training the forward states also
predict the next word and the backward states the previous word.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .config import RunConfig
from .crf import crf_loss, viterbi_decode
from .data import Corpus, Sentence, Vocabs
from .errors import ConfigError, GraphIndexError, InvalidTokenError, ShapeError, StateError

LM_PARAMS = ("lm_fw_Wm", "lm_fw_bm", "lm_bw_Wm", "lm_bw_bm",
             "lm_fw_Wq", "lm_fw_bq", "lm_bw_Wq", "lm_bw_bq")


@dataclass(frozen=True)
class ModelDims:
    vocab_size: int
    char_vocab_size: int
    n_labels: int
    lm_vocab_size: int
    embedding_dim: int
    char_embedding_dim: int
    char_hidden: int
    hidden: int
    combined_dim: int
    lm_projection: int
    output_mode: str = "crf"
    use_char: bool = True

    @classmethod
    def from_config(cls, config: RunConfig, vocabs: Vocabs) -> "ModelDims":
        return cls(
            vocab_size=len(vocabs.words), char_vocab_size=len(vocabs.chars),
            n_labels=len(vocabs.labels), lm_vocab_size=len(vocabs.lm),
            embedding_dim=config.embedding_dim, char_embedding_dim=config.char_embedding_dim,
            char_hidden=config.char_hidden, hidden=config.hidden,
            combined_dim=config.combined_dim, lm_projection=config.lm_projection,
            output_mode=config.output_mode, use_char=config.use_char,
        )


def param_shapes(dims: ModelDims) -> dict[str, tuple[int, ...]]:
    """Name and shape of every trainable tensor, in serialization order."""
    e, h, d, m, K = dims.embedding_dim, dims.hidden, dims.combined_dim, dims.lm_projection, dims.n_labels
    shapes = {"word_emb": (dims.vocab_size, e)}
    if dims.use_char:
        ec, hc = dims.char_embedding_dim, dims.char_hidden
        shapes.update({
            "char_emb": (dims.char_vocab_size, ec),
            "char_fw_Wx": (4 * hc, ec), "char_fw_U": (4 * hc, hc), "char_fw_b": (4 * hc,),
            "char_bw_Wx": (4 * hc, ec), "char_bw_U": (4 * hc, hc), "char_bw_b": (4 * hc,),
            "char_proj_W": (e, 2 * hc), "char_proj_b": (e,),
            "gate_W1": (e, e), "gate_W2": (e, e), "gate_b1": (e,),
            "gate_W3": (e, e), "gate_b3": (e,),
        })
    shapes.update({
        "fw_Wx": (4 * h, e), "fw_U": (4 * h, h), "fw_b": (4 * h,),
        "bw_Wx": (4 * h, e), "bw_U": (4 * h, h), "bw_b": (4 * h,),
        "dense_W": (d, 2 * h), "dense_b": (d,),
        "out_W": (K, d), "out_b": (K,),
    })
    if dims.output_mode == "crf":
        shapes["crf_A"] = (K + 2, K + 2)
    V = dims.lm_vocab_size
    shapes.update({
        "lm_fw_Wm": (m, h), "lm_fw_bm": (m,), "lm_bw_Wm": (m, h), "lm_bw_bm": (m,),
        "lm_fw_Wq": (V, m), "lm_fw_bq": (V,), "lm_bw_Wq": (V, m), "lm_bw_bq": (V,),
    })
    return shapes


class ModelParams:
    """Named float64 arrays for every trainable tensor of one model."""

    def __init__(self, dims: ModelDims, arrays: dict[str, np.ndarray]):
        expected = param_shapes(dims)
        if list(arrays) != list(expected):
            raise ShapeError(f"parameter names {list(arrays)} do not match {list(expected)}")
        for name, shape in expected.items():
            if arrays[name].shape != shape:
                raise ShapeError(f"{name}: expected shape {shape}, got {arrays[name].shape}")
        self.dims = dims
        self.arrays = arrays

    @classmethod
    def initialize(cls, dims: ModelDims, rng: np.random.Generator,
                   word_embeddings: np.ndarray | None = None) -> "ModelParams":
        arrays = {}
        for name, shape in param_shapes(dims).items():
            if name in ("word_emb", "char_emb") or name in ("lm_fw_Wq", "lm_bw_Wq", "lm_fw_Wm", "lm_bw_Wm"):
                arrays[name] = rng.uniform(-0.05, 0.05, size=shape)
            elif len(shape) == 2 and name != "crf_A":
                limit = np.sqrt(6.0 / (shape[0] + shape[1]))
                arrays[name] = rng.uniform(-limit, limit, size=shape)
            else:
                arrays[name] = np.zeros(shape)
        for prefix, size in (("fw", dims.hidden), ("bw", dims.hidden),
                             ("char_fw", dims.char_hidden), ("char_bw", dims.char_hidden)):
            bias = arrays.get(f"{prefix}_b")
            if bias is not None:
                bias[size:2 * size] = 1.0  # forget gate
        if word_embeddings is not None:
            if word_embeddings.shape != arrays["word_emb"].shape:
                raise ShapeError(f"word_emb: expected {arrays['word_emb'].shape}, got {word_embeddings.shape}")
            arrays["word_emb"] = np.array(word_embeddings, dtype=np.float64)
        return cls(dims, arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays.items())

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, {k: v.copy() for k, v in self.arrays.items()})

    def nodes(self, requires_grad: bool = True) -> dict[str, ad.Node]:
        """Graph leaves sharing storage with the arrays."""
        return {k: ad.leaf(v, requires_grad=requires_grad, name=k) for k, v in self.arrays.items()}

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())


@dataclass
class SentenceGraph:
    fw_h: list = field(default_factory=list)
    bw_h: list = field(default_factory=list)
    h: list = field(default_factory=list)
    d: list = field(default_factory=list)
    fw_m: list = field(default_factory=list)
    bw_m: list = field(default_factory=list)
    E: ad.Node | None = None
    fw_E: ad.Node | None = None
    bw_E: ad.Node | None = None
    total: ad.Node | None = None


# -- building blocks ---------------------------------------------------------

def _lstm_gates(z: ad.Node, c_prev: ad.Node, n: int):
    ifo = ad.sigmoid(ad.getitem(z, slice(0, 3 * n)))
    i = ad.getitem(ifo, slice(0, n))
    f = ad.getitem(ifo, slice(n, 2 * n))
    o = ad.getitem(ifo, slice(2 * n, 3 * n))
    g = ad.tanh(ad.getitem(z, slice(3 * n, 4 * n)))
    c = ad.add(ad.multiply(f, c_prev), ad.multiply(i, g))
    h = ad.multiply(o, ad.tanh(c))
    return h, c


def lstm_step(x: ad.Node, h_prev: ad.Node, c_prev: ad.Node, Wx: ad.Node, U: ad.Node, b: ad.Node):
    """One step of a forget-gate LSTM without peepholes.

    ``Wx``, ``U`` and ``b`` stack the input, forget, output and candidate
    gates row-wise: ``z = Wx x + U h_prev + b``.
    """
    n = h_prev.value.shape[0]
    if (Wx.value.shape != (4 * n, x.value.shape[0]) or U.value.shape != (4 * n, n)
            or c_prev.value.shape != (n,)):
        raise ShapeError(f"lstm_step: Wx {Wx.value.shape}, U {U.value.shape} do not fit "
                         f"x {x.value.shape}, h {h_prev.value.shape}")
    z = ad.add_n([ad.matmul(Wx, x), ad.matmul(U, h_prev), b])
    return _lstm_gates(z, c_prev, n)


def run_lstm(xs: Sequence[ad.Node], Wx: ad.Node, U: ad.Node, b: ad.Node, hidden: int) -> list[ad.Node]:
    """Hidden states of an LSTM run over ``xs`` from a zero initial state.

    Same arithmetic as repeated :func:`lstm_step`, with the input projections
    of all steps computed as one matrix product.
    """
    if Wx.value.shape != (4 * hidden, xs[0].value.shape[0]) or U.value.shape != (4 * hidden, hidden):
        raise ShapeError(f"run_lstm: Wx {Wx.value.shape}, U {U.value.shape} do not fit hidden size {hidden}")
    Zx = ad.add_column(ad.matmul(Wx, ad.stack_columns(xs)), b)
    c = ad.constant(np.zeros(hidden))
    h = None
    states = []
    for t in range(len(xs)):
        z = ad.getitem(Zx, (slice(None), t))
        if h is not None:
            z = ad.add(z, ad.matmul(U, h))
        h, c = _lstm_gates(z, c, hidden)
        states.append(h)
    return states


def char_representation(char_ids: Sequence[int], P: dict[str, ad.Node], char_hidden: int) -> ad.Node:
    """Bidirectional char-LSTM final states, concatenated and passed through tanh."""
    if not char_ids:
        raise InvalidTokenError("word has no characters")
    chars = [ad.row_lookup(P["char_emb"], c) for c in char_ids]
    fw = run_lstm(chars, P["char_fw_Wx"], P["char_fw_U"], P["char_fw_b"], char_hidden)[-1]
    bw = run_lstm(chars[::-1], P["char_bw_Wx"], P["char_bw_U"], P["char_bw_b"], char_hidden)[-1]
    return ad.tanh(ad.add(ad.matmul(P["char_proj_W"], ad.concat(fw, bw)), P["char_proj_b"]))


def combine_word_char(x_word: ad.Node, x_char: ad.Node, P: dict[str, ad.Node]) -> ad.Node:
    """Gate ``z * x_word + (1 - z) * x_char`` with ``z = sigmoid(W3 tanh(W1 x_word + W2 x_char))``."""
    if x_word.value.shape != x_char.value.shape:
        raise ShapeError(f"combine_word_char: {x_word.value.shape} vs {x_char.value.shape}")
    inner = ad.tanh(ad.add_n([ad.matmul(P["gate_W1"], x_word), ad.matmul(P["gate_W2"], x_char), P["gate_b1"]]))
    z = ad.sigmoid(ad.add(ad.matmul(P["gate_W3"], inner), P["gate_b3"]))
    return ad.add(x_char, ad.multiply(z, ad.add(x_word, ad.scale(x_char, -1.0))))


def apply_dropout(x, p: float, mode: str, rng: np.random.Generator | None = None):
    """Element-wise dropout without rescaling at training time.

    In ``"train"`` mode each element is zeroed with probability ``p`` and
    kept as-is otherwise; in ``"eval"`` mode every element is multiplied by
    ``1 - p``. Accepts a graph node or a plain array.
    """
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p}")
    if p == 0.0:
        return x
    is_node = isinstance(x, ad.Node)
    value = x.value if is_node else np.asarray(x, dtype=np.float64)
    if mode == "train":
        mask = (rng.random(value.shape) >= p).astype(np.float64)
        return ad.multiply(x, ad.constant(mask)) if is_node else value * mask
    if mode == "eval":
        return ad.scale(x, 1.0 - p) if is_node else value * (1.0 - p)
    raise ConfigError(f"unknown mode {mode!r}")


def word_input(tok, P: dict[str, ad.Node], dims: ModelDims, cache: dict | None = None) -> ad.Node:
    """Input vector of one token before dropout.

    ``cache`` may map (input_id, char_ids) to an already built node; it is
    only valid for one set of parameter leaves.
    """
    key = (tok.input_id, tok.char_ids)
    if cache is not None and key in cache:
        return cache[key]
    x = ad.row_lookup(P["word_emb"], tok.input_id)
    if dims.use_char:
        x = combine_word_char(x, char_representation(tok.char_ids, P, dims.char_hidden), P)
    if cache is not None:
        cache[key] = x
    return x


def encode_sentence(sentence: Sentence, P: dict[str, ad.Node], dims: ModelDims, mode: str = "eval",
                    dropout_p: float = 0.0, rng: np.random.Generator | None = None,
                    with_lm: bool = True, cache: dict | None = None) -> SentenceGraph:
    if not sentence.encoded:
        raise StateError("sentence has not been encoded against the vocabularies")
    xs = [apply_dropout(word_input(tok, P, dims, cache), dropout_p, mode, rng) for tok in sentence.tokens]

    g = SentenceGraph()
    g.fw_h = run_lstm(xs, P["fw_Wx"], P["fw_U"], P["fw_b"], dims.hidden)
    g.bw_h = run_lstm(xs[::-1], P["bw_Wx"], P["bw_U"], P["bw_b"], dims.hidden)[::-1]
    for fw, bw in zip(g.fw_h, g.bw_h):
        h = ad.concat(fw, bw)
        g.h.append(h)
        g.d.append(ad.tanh(ad.add(ad.matmul(P["dense_W"], h), P["dense_b"])))
    if with_lm:
        g.fw_m = [ad.tanh(ad.add(ad.matmul(P["lm_fw_Wm"], h), P["lm_fw_bm"])) for h in g.fw_h]
        g.bw_m = [ad.tanh(ad.add(ad.matmul(P["lm_bw_Wm"], h), P["lm_bw_bm"])) for h in g.bw_h]
    return g


def label_scores(d: Sequence[ad.Node], W_o: ad.Node, b_o: ad.Node | None = None) -> list[ad.Node]:
    out = [ad.matmul(W_o, dt) for dt in d]
    if b_o is not None:
        out = [ad.add(s, b_o) for s in out]
    return out


def _nll(logits: Sequence[ad.Node], targets: Sequence[int]) -> ad.Node:
    if not logits:
        return ad.constant(0.0)
    K = logits[0].value.shape[0]
    for y in targets:
        if not 0 <= y < K:
            raise GraphIndexError(f"target id {y} out of range for {K} classes")
    return ad.scale(ad.add_n([ad.pick(ad.log_softmax(s), y) for s, y in zip(logits, targets)]), -1.0)


def softmax_label_loss(d: Sequence[ad.Node], labels: Sequence[int], W_o: ad.Node,
                       b_o: ad.Node | None = None) -> ad.Node:
    """Summed negative log-probability of the gold labels."""
    if len(d) != len(labels):
        raise ShapeError(f"{len(d)} positions but {len(labels)} labels")
    return _nll(label_scores(d, W_o, b_o), labels)


def lm_losses(graph: SentenceGraph, lm_ids: Sequence[int], P: dict[str, ad.Node]):
    """Next-word loss from forward states and previous-word loss from backward states.

    No sentence-boundary targets: a one-token sentence contributes zero.
    """
    if len(graph.fw_m) != len(lm_ids):
        raise StateError("graph was built without language-modeling projections")
    fw_logits = [ad.add(ad.matmul(P["lm_fw_Wq"], m), P["lm_fw_bq"]) for m in graph.fw_m[:-1]]
    bw_logits = [ad.add(ad.matmul(P["lm_bw_Wq"], m), P["lm_bw_bq"]) for m in graph.bw_m[1:]]
    return _nll(fw_logits, lm_ids[1:]), _nll(bw_logits, lm_ids[:-1])


def total_loss(E: ad.Node, fw_E: ad.Node | None, bw_E: ad.Node | None, gamma: float) -> ad.Node:
    if gamma < 0:
        raise ConfigError(f"gamma must be non-negative, got {gamma}")
    if fw_E is None or bw_E is None:
        return E
    return ad.add(E, ad.scale(ad.add(fw_E, bw_E), gamma))


def sentence_loss(sentence: Sentence, P: dict[str, ad.Node], dims: ModelDims, gamma: float,
                  mode: str = "train", dropout_p: float = 0.0,
                  rng: np.random.Generator | None = None, with_lm: bool | None = None,
                  cache: dict | None = None) -> SentenceGraph:
    """Build the full graph for one sentence, with all loss nodes filled in.

    LM heads are skipped when ``gamma == 0`` unless ``with_lm`` is forced.
    """
    if with_lm is None:
        with_lm = gamma > 0
    g = encode_sentence(sentence, P, dims, mode, dropout_p, rng, with_lm=with_lm, cache=cache)
    scores = label_scores(g.d, P["out_W"], P["out_b"])
    if dims.output_mode == "crf":
        g.E = crf_loss(scores, sentence.labels, P["crf_A"])
    else:
        g.E = _nll(scores, sentence.labels)
    if with_lm:
        g.fw_E, g.bw_E = lm_losses(g, [t.lm_id for t in sentence.tokens], P)
    g.total = total_loss(g.E, g.fw_E, g.bw_E, gamma)
    return g


def predict(sentence: Sentence, params: ModelParams, dropout_p: float = 0.0,
            P: dict[str, ad.Node] | None = None, cache: dict | None = None) -> list[int]:
    """Label ids for one sentence. The LM heads are never touched."""
    if P is None:
        P = params.nodes(requires_grad=False)
    g = encode_sentence(sentence, P, params.dims, "eval", dropout_p, with_lm=False, cache=cache)
    scores = np.stack([s.value for s in label_scores(g.d, P["out_W"], P["out_b"])])
    if params.dims.output_mode == "crf":
        return viterbi_decode(scores, params["crf_A"])[0]
    return [int(i) for i in scores.argmax(axis=1)]


@dataclass
class Tagger:
    """A trained model together with the vocabularies and settings it needs."""

    config: RunConfig
    vocabs: Vocabs
    params: ModelParams

    @property
    def dims(self) -> ModelDims:
        return self.params.dims

    def predict(self, sentence: Sentence) -> list[int]:
        return predict(sentence, self.params, self.config.effective_dropout)

    def predict_corpus(self, corpus: Corpus) -> list[list[str]]:
        P = self.params.nodes(requires_grad=False)
        cache: dict = {}
        p = self.config.effective_dropout
        return [[self.vocabs.labels[i] for i in predict(s, self.params, p, P, cache)]
                for s in corpus.sentences]
