import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from seqlm.data import build_vocabularies, encode_corpus, read_conll
from seqlm.synthetic import tagging_corpus

settings.register_profile("seqlm", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("seqlm")


SMALL = dict(hidden=6, embedding_dim=5, combined_dim=4, lm_projection=3,
             char_embedding_dim=3, char_hidden=3, batch_size=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def toy_corpus():
    return tagging_corpus(n_sentences=20, n_labels=3, vocab_size=12, seed=3)


@pytest.fixture(scope="session")
def toy_encoded(toy_corpus):
    vocabs = build_vocabularies(toy_corpus, lm_k=8)
    return vocabs, encode_corpus(toy_corpus, vocabs)


@pytest.fixture
def ner_text():
    return ("Fischler NNP B-PER\nproposes VBZ O\nmeasures NNS O\n\n"
            "EU NNP B-ORG\nrejects VBZ O\nGerman JJ B-MISC\ncall NN O\n\n")


def corpus_from(sentences):
    """Corpus from [[(word, label), ...], ...]."""
    text = "".join("".join(f"{w} {lab}\n" for w, lab in s) + "\n" for s in sentences)
    return read_conll(text)


# acceptance criteria append (number, title, passed, detail) here
ACCEPTANCE: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {number:2d}. {title}: {detail}")
