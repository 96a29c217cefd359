"""Linear-chain CRF output layer.

The transition matrix has ``K + 2`` rows and columns: labels ``0..K-1``,
then a start state (row ``K``) and an end state (column ``K + 1``).
Only ``A[K, :K]``, ``A[:K, :K]`` and ``A[:K, K + 1]`` take part in scoring.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .errors import ShapeError


def _check(emissions: np.ndarray, A: np.ndarray) -> int:
    if emissions.ndim != 2 or emissions.shape[0] < 1:
        raise ShapeError(f"emissions must be T x K with T >= 1, got {emissions.shape}")
    K = emissions.shape[1]
    if A.shape != (K + 2, K + 2):
        raise ShapeError(f"transitions must be {(K + 2, K + 2)}, got {A.shape}")
    return K


def path_score(emissions: np.ndarray, A: np.ndarray, path: Sequence[int]) -> float:
    K = _check(emissions, A)
    start, end = K, K + 1
    s = A[start, path[0]] + A[path[-1], end]
    for t, y in enumerate(path):
        s += emissions[t, y]
        if t > 0:
            s += A[path[t - 1], y]
    return float(s)


def log_partition(emissions: np.ndarray, A: np.ndarray) -> float:
    """Forward algorithm in log space."""
    K = _check(emissions, A)
    trans = A[:K, :K]
    alpha = A[K, :K] + emissions[0]
    for t in range(1, emissions.shape[0]):
        scores = alpha[:, None] + trans
        m = scores.max(axis=0)
        alpha = m + np.log(np.exp(scores - m).sum(axis=0)) + emissions[t]
    final = alpha + A[:K, K + 1]
    m = final.max()
    return float(m + np.log(np.exp(final - m).sum()))


def viterbi_decode(emissions: np.ndarray, A: np.ndarray) -> tuple[list[int], float]:
    """Best label path and its score. Ties go to the lower label id."""
    emissions = np.asarray(emissions, dtype=np.float64)
    K = _check(emissions, A)
    T = emissions.shape[0]
    trans = A[:K, :K]
    delta = A[K, :K] + emissions[0]
    backptr = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        scores = delta[:, None] + trans
        backptr[t] = scores.argmax(axis=0)
        delta = scores[backptr[t], np.arange(K)] + emissions[t]
    final = delta + A[:K, K + 1]
    best = int(final.argmax())
    path = [best]
    for t in range(T - 1, 0, -1):
        best = int(backptr[t, best])
        path.append(best)
    path.reverse()
    return path, float(final.max())


def crf_loss(emissions: Sequence[ad.Node], labels: Sequence[int], A: ad.Node) -> ad.Node:
    """Negative log-likelihood of the gold path: ``log Z - s(y)``.

    ``emissions`` holds one length-K score vector per token.
    """
    T = len(emissions)
    if T < 1 or T != len(labels):
        raise ShapeError(f"crf_loss: {T} emission vectors for {len(labels)} labels")
    K = emissions[0].value.shape[0]
    if A.value.shape != (K + 2, K + 2):
        raise ShapeError(f"crf_loss: transitions must be {(K + 2, K + 2)}, got {A.value.shape}")
    start, end = K, K + 1

    trans = ad.getitem(A, (slice(0, K), slice(0, K)))
    alpha = ad.add(ad.getitem(A, (start, slice(0, K))), emissions[0])
    for t in range(1, T):
        alpha = ad.add(ad.logsumexp_columns(ad.add_column(trans, alpha)), emissions[t])
    log_z = ad.logsumexp(ad.add(alpha, ad.getitem(A, (slice(0, K), end))))

    counts = np.zeros((K + 2, K + 2))
    counts[start, labels[0]] += 1
    counts[labels[-1], end] += 1
    for prev, cur in zip(labels[:-1], labels[1:]):
        counts[prev, cur] += 1
    gold = [ad.total(ad.multiply(A, ad.constant(counts)))]
    gold.extend(ad.pick(e, y) for e, y in zip(emissions, labels))
    return ad.add(log_z, ad.scale(ad.add_n(gold), -1.0))
