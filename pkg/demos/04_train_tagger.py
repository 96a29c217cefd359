# Train a small tagger, save it, load it back and label new text
import tempfile
from pathlib import Path

from seqlm import RunConfig, load_model, save_model, train
from seqlm.data import encode_corpus, read_conll
from seqlm.metrics import accuracy
from seqlm.synthetic import tagging_text

# A synthetic corpus where each label has its own word pattern.
train_c = read_conll(tagging_text(n_sentences=60, seed=0))
dev_c = read_conll(tagging_text(n_sentences=20, seed=1), split_role="dev")
print(len(train_c), "training sentences, labels", train_c.label_set)

# Small sizes keep this quick. The full-size defaults are in RunConfig().
config = RunConfig(hidden=24, embedding_dim=16, char_embedding_dim=8, char_hidden=12, combined_dim=16,
                   lm_projection=12, batch_size=8, output_mode="crf", dev_metric="accuracy",
                   max_epochs=15, patience=4)
tagger, history = train(config, train_c, dev_c, seed=1)
for rec in history.epochs:
    print(f"epoch {rec.epoch:2d}  loss {rec.train_loss:8.2f}  dev acc {rec.dev_score:.3f}")
print("best epoch", history.best_epoch, "stopped by", history.stop_reason)

path = Path(tempfile.mkdtemp()) / "tagger.bin"
save_model(path, tagger)
loaded = load_model(path)

dev = encode_corpus(dev_c, loaded.vocabs)
pred = loaded.predict_corpus(dev)
print("dev accuracy after reload", accuracy(pred, dev_c.label_strings()))
for word, label in zip(dev_c.token_strings()[0], pred[0]):
    print(f"  {word:12s} {label}")
