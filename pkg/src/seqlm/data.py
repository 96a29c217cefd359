"""Corpus reading, token normalization, vocabularies, embeddings and batching."""

from __future__ import annotations

import io
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ConfigError, EmptyCorpusError, InvalidTokenError, LabelError, ParseError

OOV = "<OOV>"
REST = "<REST>"
UNK_CHAR = "<UNK>"

_DIGITS = re.compile(r"[0-9]")


def normalize_token(surface: str) -> str:
    """Replace every ASCII digit with '0', leaving everything else untouched."""
    if not surface:
        raise InvalidTokenError("empty token")
    return _DIGITS.sub("0", surface)


@dataclass(frozen=True)
class Token:
    surface: str
    normalized: str
    input_id: int | None = None
    lm_id: int | None = None
    char_ids: tuple[int, ...] | None = None

    @property
    def encoded(self) -> bool:
        return self.input_id is not None and self.lm_id is not None and self.char_ids is not None


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    labels: tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) == 0:
            raise EmptyCorpusError("sentence has no tokens")
        if len(self.tokens) != len(self.labels):
            raise ParseError(f"{len(self.tokens)} tokens but {len(self.labels)} labels")

    def __len__(self):
        return len(self.tokens)

    @property
    def encoded(self) -> bool:
        return all(tok.encoded for tok in self.tokens)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    label_set: tuple[str, ...]
    split_role: str = "train"

    def __len__(self):
        return len(self.sentences)

    def label_strings(self) -> list[list[str]]:
        return [[self.label_set[i] for i in s.labels] for s in self.sentences]

    def token_strings(self) -> list[list[str]]:
        return [[t.surface for t in s.tokens] for s in self.sentences]

    @property
    def n_tokens(self) -> int:
        return sum(len(s) for s in self.sentences)


class Vocabulary:
    """Word (or character) to id map with a reserved unknown id at 0."""

    def __init__(self, words: Iterable[str], counts: dict[str, int] | None = None, unknown: str = OOV):
        self.id_to_word = [unknown]
        self.word_to_id: dict[str, int] = {}
        for w in words:
            if w not in self.word_to_id:
                self.word_to_id[w] = len(self.id_to_word)
                self.id_to_word.append(w)
        self.oov_id = 0
        self.counts = dict(counts or {})

    def __len__(self):
        return len(self.id_to_word)

    def __contains__(self, word):
        return word in self.word_to_id

    def get(self, word: str) -> int:
        return self.word_to_id.get(word, self.oov_id)


class LmVocabulary(Vocabulary):
    """The ``k`` most frequent training words plus a rest token (id 0)."""

    def __init__(self, words: Sequence[str], k: int):
        super().__init__(words, unknown=REST)
        self.k = k

    @property
    def rest_id(self) -> int:
        return self.oov_id


@dataclass
class Vocabs:
    words: Vocabulary
    lm: LmVocabulary
    chars: Vocabulary
    labels: list[str]
    label_to_id: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.label_to_id = {lab: i for i, lab in enumerate(self.labels)}

    def to_dict(self) -> dict:
        return {
            "words": self.words.id_to_word[1:],
            "lm_words": self.lm.id_to_word[1:],
            "lm_k": self.lm.k,
            "chars": self.chars.id_to_word[1:],
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabs":
        return cls(
            words=Vocabulary(d["words"]),
            lm=LmVocabulary(d["lm_words"], d["lm_k"]),
            chars=Vocabulary(d["chars"], unknown=UNK_CHAR),
            labels=list(d["labels"]),
        )


def _open_text(text) -> TextIO:
    if isinstance(text, str):
        return io.StringIO(text)
    return text


def read_conll(text, token_column: int = 0, label_column: int | None = -1,
               split_role: str = "train") -> Corpus:
    """Read whitespace-separated column data.

    ``text`` is a string or an open text stream. Blank lines separate
    sentences and lines starting with ``#`` are skipped. Negative column
    indices count from the end of each line. With ``label_column=None`` no
    labels are read and every token receives the placeholder label ``O``.
    """
    stream = _open_text(text)
    columns = [token_column] if label_column is None else [token_column, label_column]
    needed = max(c + 1 if c >= 0 else -c for c in columns)

    sentences: list[Sentence] = []
    labels_seen: dict[str, int] = {}
    tokens: list[Token] = []
    label_ids: list[int] = []

    def flush():
        if tokens:
            sentences.append(Sentence(tuple(tokens), tuple(label_ids)))
            tokens.clear()
            label_ids.clear()

    for lineno, line in enumerate(stream, start=1):
        stripped = line.strip()
        if not stripped:
            flush()
            continue
        if stripped.startswith("#"):
            continue
        cols = stripped.split()
        if len(cols) < needed or (label_column is not None and len(cols) < 2):
            raise ParseError(f"expected at least {max(needed, len(columns))} columns, got {len(cols)}", line=lineno)
        surface = cols[token_column]
        label = cols[label_column] if label_column is not None else "O"
        if label not in labels_seen:
            labels_seen[label] = len(labels_seen)
        tokens.append(Token(surface, normalize_token(surface)))
        label_ids.append(labels_seen[label])
    flush()

    if not sentences:
        raise EmptyCorpusError("corpus contains no sentences")
    return Corpus(tuple(sentences), tuple(labels_seen), split_role)


def read_conll_file(path, token_column: int = 0, label_column: int | None = -1,
                    split_role: str = "train", iob1: bool = False) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        corpus = read_conll(fh, token_column, label_column, split_role)
    if iob1:
        corpus = convert_iob1(corpus)
    return corpus


def write_conll(corpus: Corpus, fh: TextIO, predicted: Sequence[Sequence[str]] | None = None) -> None:
    for i, sent in enumerate(corpus.sentences):
        for j, (tok, lab) in enumerate(zip(sent.tokens, sent.labels)):
            cols = [tok.surface, corpus.label_set[lab]]
            if predicted is not None:
                cols.append(predicted[i][j])
            fh.write("\t".join(cols) + "\n")
        fh.write("\n")


def iob1_to_bio(labels: Sequence[str]) -> list[str]:
    """Rewrite IOB1 tags so every chunk starts with ``B-``."""
    out = []
    prev = "O"
    for lab in labels:
        if lab.startswith("I-"):
            typ = lab[2:]
            if prev == "O" or prev[2:] != typ:
                lab = "B-" + typ
        out.append(lab)
        prev = lab
    return out


def convert_iob1(corpus: Corpus) -> Corpus:
    label_index: dict[str, int] = {}
    sentences = []
    for sent, labs in zip(corpus.sentences, corpus.label_strings()):
        ids = []
        for lab in iob1_to_bio(labs):
            ids.append(label_index.setdefault(lab, len(label_index)))
        sentences.append(Sentence(sent.tokens, tuple(ids)))
    return Corpus(tuple(sentences), tuple(label_index), corpus.split_role)


def build_vocabularies(train: Corpus, lm_k: int) -> Vocabs:
    """Build input, LM, character and label vocabularies from a training corpus.

    Input words need a training count of at least 2. The LM vocabulary keeps
    the ``lm_k`` most frequent words, breaking count ties by first occurrence.
    """
    if lm_k <= 0:
        raise ConfigError(f"lm_k must be positive, got {lm_k}")
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    chars: dict[str, None] = {}
    for sent in train.sentences:
        for tok in sent.tokens:
            counts[tok.normalized] += 1
            first_seen.setdefault(tok.normalized, len(first_seen))
            for ch in tok.surface:
                chars.setdefault(ch)

    order = sorted(first_seen, key=first_seen.__getitem__)
    words = Vocabulary([w for w in order if counts[w] >= 2], counts=dict(counts))
    ranked = sorted(order, key=lambda w: (-counts[w], first_seen[w]))
    lm = LmVocabulary(ranked[:lm_k], lm_k)
    return Vocabs(words, lm, Vocabulary(chars, unknown=UNK_CHAR), list(train.label_set))


def encode_corpus(corpus: Corpus, vocabs: Vocabs, split_role: str | None = None,
                  strict_labels: bool = True) -> Corpus:
    """Fill in token ids and remap labels onto the training label map."""
    remap = []
    for lab in corpus.label_set:
        if lab in vocabs.label_to_id:
            remap.append(vocabs.label_to_id[lab])
        elif strict_labels:
            raise LabelError(f"label {lab!r} does not occur in the training data")
        else:
            remap.append(0)

    sentences = []
    for sent in corpus.sentences:
        toks = tuple(
            replace(tok,
                    input_id=vocabs.words.get(tok.normalized),
                    lm_id=vocabs.lm.get(tok.normalized),
                    char_ids=tuple(vocabs.chars.get(ch) for ch in tok.surface))
            for tok in sent.tokens
        )
        sentences.append(Sentence(toks, tuple(remap[i] for i in sent.labels)))
    return Corpus(tuple(sentences), tuple(vocabs.labels), split_role or corpus.split_role)


def load_pretrained_embeddings(path, vocab: Vocabulary, dim: int,
                               rng: np.random.Generator | int | None = None) -> tuple[np.ndarray, int]:
    """Load a plain-text word2vec file into a ``len(vocab) x dim`` matrix.

    Rows of words not found in the file, and the OOV row, are drawn from
    U(-0.05, 0.05). Returns the matrix and the number of matched words.
    """
    rng = np.random.default_rng(rng)
    matrix = rng.uniform(-0.05, 0.05, size=(len(vocab), dim))
    matched = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                if int(parts[1]) != dim:
                    raise ConfigError(f"embedding file has dimension {parts[1]}, configured {dim}")
                continue
            if len(parts) - 1 != dim:
                raise ConfigError(f"line {lineno}: embedding has dimension {len(parts) - 1}, configured {dim}")
            word = parts[0]
            idx = vocab.word_to_id.get(word)
            if idx is None or idx in matched:
                continue
            try:
                matrix[idx] = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"cannot parse vector: {exc}", line=lineno) from None
            matched.add(idx)
    return matrix, len(matched)


def make_batches(corpus: Corpus | Sequence[Sentence], batch_size: int,
                 shuffle_seed: int | None = None) -> list[list[Sentence]]:
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    sentences = list(corpus.sentences if isinstance(corpus, Corpus) else corpus)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(len(sentences))
        sentences = [sentences[i] for i in order]
    return [sentences[i:i + batch_size] for i in range(0, len(sentences), batch_size)]
