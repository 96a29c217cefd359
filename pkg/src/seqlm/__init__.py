"""BiLSTM sequence labeling with an auxiliary bidirectional language-modeling loss."""

from .config import RunConfig, load_config, parse_config
from .data import (Corpus, Sentence, Token, Vocabs, build_vocabularies, encode_corpus,
                   load_pretrained_embeddings, make_batches, normalize_token, read_conll,
                   read_conll_file)
from .metrics import MetricReport, Span, accuracy, entity_f1, extract_spans, token_prf
from .model import ModelDims, ModelParams, Tagger, predict
from .serialize import load_model, save_model
from .trainer import run_seeds, train

__version__ = "0.1.0"
