# Linear-chain CRF: partition function and Viterbi decoding
#
# Scores of a label path combine per-token emissions with transition scores,
# including transitions out of a start state and into an end state.
import itertools

import numpy as np

from seqlm.crf import log_partition, path_score, viterbi_decode

rng = np.random.default_rng(0)
T, K = 4, 3
emissions = rng.normal(size=(T, K))
A = rng.normal(size=(K + 2, K + 2))  # rows/cols K and K+1 are start and end

# The forward algorithm is linear in T; enumeration is K**T.
scores = {p: path_score(emissions, A, p) for p in itertools.product(range(K), repeat=T)}
brute = np.log(sum(np.exp(s) for s in scores.values()))
print(f"log Z forward {log_partition(emissions, A):.12f}")
print(f"log Z brute   {brute:.12f}")

path, best = viterbi_decode(emissions, A)
print("viterbi", path, round(best, 6))
print("brute  ", list(max(scores, key=scores.get)), round(max(scores.values()), 6))

# Probability of a path is exp(s(y) - log Z); they sum to one.
print("sum of path probabilities", sum(np.exp(s - brute) for s in scores.values()))

# Without transitions decoding is a per-token argmax.
print(viterbi_decode(emissions, np.zeros_like(A))[0], emissions.argmax(axis=1).tolist())
