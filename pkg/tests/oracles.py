"""Independent reference computations used by the tests."""

import itertools

import numpy as np


def enum_scores(emissions, A):
    """Score of every label path, by direct summation."""
    T, K = emissions.shape
    out = {}
    for path in itertools.product(range(K), repeat=T):
        s = A[K, path[0]] + A[path[-1], K + 1] + sum(emissions[t, y] for t, y in enumerate(path))
        s += sum(A[a, b] for a, b in zip(path[:-1], path[1:]))
        out[path] = s
    return out


def enum_log_z(emissions, A):
    s = np.array(list(enum_scores(emissions, A).values()))
    m = s.max()
    return m + np.log(np.exp(s - m).sum())


def enum_best(emissions, A):
    scores = enum_scores(emissions, A)
    best = max(scores, key=lambda p: (scores[p], [-y for y in p]))
    return list(best), scores[best]


def random_instances(n, seed=0, max_paths=4096):
    rng = np.random.default_rng(seed)
    shapes = [(T, K) for T in range(1, 9) for K in range(1, 7) if K ** T <= max_paths]
    for i in range(n):
        T, K = shapes[i % len(shapes)]
        scale = rng.choice([0.1, 1.0, 5.0])
        yield rng.normal(0, scale, size=(T, K)), rng.normal(0, scale, size=(K + 2, K + 2))
