# Baseline, dropout and the auxiliary language-modeling loss on error detection
#
# The synthetic corpus uses a bigram grammar over word classes. An error is a
# word whose class may not follow the previous one, so spotting errors and
# predicting neighbouring words rely on the same regularity.
from seqlm import RunConfig, run_seeds
from seqlm.metrics import format_table
from seqlm.synthetic import error_detection_corpora

train_c, dev_c, test_c = error_detection_corpora(n_train=150, n_dev=150, n_test=150, words_per_class=4)
rate = sum(lab == "i" for s in train_c.label_strings() for lab in s) / train_c.n_tokens
print(f"{rate:.1%} of training tokens are errors")

config = RunConfig(hidden=16, embedding_dim=16, combined_dim=16, lm_projection=16, use_char=False,
                   output_mode="softmax", dev_metric="f05", batch_size=16, max_epochs=40, patience=15,
                   seeds=(1, 2, 3))
systems = {
    "Baseline": config.replace(use_dropout=False, gamma=0.0),
    "+ dropout": config.replace(gamma=0.0),
    "+ LMcost": config,
}
rows = {}
for name, cfg in systems.items():
    runs, summary = run_seeds(cfg, train_c, dev_c, test_c)
    rows[name] = {"dev": summary["dev"], "test": summary["test"]}
    print(name, "best epochs", [r.history.best_epoch for r in runs])
print(format_table(rows, "f05"))

# The same comparison from the shell:
#   seqlm ablate --config run.cfg --train train.txt --dev dev.txt --test test.txt --out curves.jsonl
