"""Small synthetic corpora so every workflow runs without external data."""

from __future__ import annotations

from collections import Counter

import numpy as np

from .data import Corpus, read_conll

_SYLLABLES = ["ka", "lo", "mi", "ru", "te", "sa", "no", "vi", "pe", "du", "ga", "zo"]


def _make_words(n: int, rng: np.random.Generator, suffix: str = "") -> list[str]:
    words: list[str] = []
    seen = set()
    while len(words) < n:
        w = "".join(rng.choice(_SYLLABLES, size=int(rng.integers(1, 4)))) + suffix
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _to_conll(sentences) -> str:
    return "".join("".join(f"{w} {lab}\n" for w, lab in sent) + "\n" for sent in sentences)


def _ensure_repeats(sentences, rng):
    """Insert a second copy of every singleton word, so none falls to OOV."""
    counts = Counter(w for sent in sentences for w, _ in sent)
    for i, sent in enumerate(sentences):
        for pair in list(sent):
            if counts[pair[0]] == 1:
                j = int(rng.integers(len(sentences) - 1))
                j += j >= i
                sentences[j].insert(int(rng.integers(len(sentences[j]) + 1)), pair)
                counts[pair[0]] += 1


def tagging_text(n_sentences: int = 60, n_labels: int = 3, vocab_size: int = 40,
                 min_len: int = 3, max_len: int = 8, seed: int = 0) -> str:
    """Column text where each word type always carries the same label.

    Word types are split evenly across labels and each type's spelling ends
    with a label-specific letter, so the rule is learnable from either the
    word identity or its characters. Every word occurs at least twice.
    """
    rng = np.random.default_rng(seed)
    labels = [f"L{k}" for k in range(n_labels)]
    per = max(1, vocab_size // n_labels)
    lexicon = [(w, lab) for k, lab in enumerate(labels) for w in _make_words(per, rng, suffix="qxjwfhy"[k % 7])]
    sentences = []
    for _ in range(n_sentences):
        n = int(rng.integers(min_len, max_len + 1))
        sentences.append([lexicon[int(i)] for i in rng.integers(len(lexicon), size=n)])
    _ensure_repeats(sentences, rng)
    return _to_conll(sentences)


def tagging_corpus(split_role: str = "train", **kwargs) -> Corpus:
    return read_conll(tagging_text(**kwargs), split_role=split_role)


class ErrorGrammar:
    """Class-level bigram grammar for synthetic error detection.

    Word types fall into ``n_classes`` classes and each class allows only
    ``n_successors`` successor classes. A correct sentence follows the
    allowed transitions; an error replaces one word with a word from a class
    that is not allowed after the previous word. The only signal for an
    error is which words may follow which, the same regularity a
    next-word predictor has to learn from every token.
    """

    def __init__(self, n_classes: int = 8, words_per_class: int = 12, n_successors: int = 2, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.n_classes = n_classes
        words = _make_words(n_classes * words_per_class, rng)
        self.words = [words[c * words_per_class:(c + 1) * words_per_class] for c in range(n_classes)]
        self.successors = [sorted(rng.choice(n_classes, size=n_successors, replace=False).tolist())
                           for _ in range(n_classes)]

    def sentences(self, n: int, error_rate: float = 0.15, min_len: int = 6, max_len: int = 12,
                  seed: int = 0, correct_label: str = "c", error_label: str = "i"):
        rng = np.random.default_rng(seed)
        out = []
        for _ in range(n):
            length = int(rng.integers(min_len, max_len + 1))
            cls = int(rng.integers(self.n_classes))
            sent = []
            prev = None
            for t in range(length):
                if t > 0:
                    cls = int(rng.choice(self.successors[cls]))
                label = correct_label
                shown = cls
                if prev is not None and rng.random() < error_rate:
                    banned = set(self.successors[prev])
                    options = [c for c in range(self.n_classes) if c not in banned]
                    shown = int(rng.choice(options))
                    label = error_label
                sent.append((self.words[shown][int(rng.integers(len(self.words[shown])))], label))
                prev = cls
            out.append(sent)
        return out

    def text(self, n: int, **kwargs) -> str:
        return _to_conll(self.sentences(n, **kwargs))


def error_detection_corpora(n_train: int = 150, n_dev: int = 150, n_test: int = 150,
                            error_rate: float = 0.15, seed: int = 0, **grammar_kwargs):
    """Train/dev/test corpora drawn from one :class:`ErrorGrammar`."""
    grammar = ErrorGrammar(seed=seed, **grammar_kwargs)
    return tuple(
        read_conll(grammar.text(n, error_rate=error_rate, seed=seed + 1 + k), split_role=role)
        for k, (n, role) in enumerate(((n_train, "train"), (n_dev, "dev"), (n_test, "test")))
    )
