# Evaluation: token F0.5, entity-level F1, accuracy
from seqlm.metrics import accuracy, entity_f1, extract_spans, fbeta, token_prf

# Error detection scores the rare "i" (incorrect) label. F0.5 weighs
# precision twice as much as recall.
gold = [["c", "i", "c", "i"], ["c", "c", "i"]]
pred = [["c", "i", "i", "c"], ["c", "c", "i"]]
print(token_prf(pred, gold, "i", beta=0.5))

# Chunk tasks compare exact spans. An I- tag that does not continue a chunk
# of its type starts a new one.
print(extract_spans(["I-LOC", "B-LOC", "I-ORG", "O", "B-PER", "I-PER"]))
gold = [["B-PER", "I-PER", "O", "B-LOC"]]
pred = [["B-PER", "O", "O", "B-LOC"]]
print(entity_f1(pred, gold))

print("accuracy", accuracy([["NN", "VB", "DT"]], [["NN", "NN", "DT"]]))

# Averages over seeds are taken per field, so the mean F is not the F of
# the mean precision and recall.
runs = [(1.0, 0.1), (0.1, 1.0)]
mean_f = sum(fbeta(p, r, 0.5) for p, r in runs) / 2
print(f"mean F0.5 {mean_f:.4f} vs F0.5 of means {fbeta(0.55, 0.55, 0.5):.4f}")
