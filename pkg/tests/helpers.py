"""Shared statistical test utilities."""

import numpy as np


def batch_mcse(draws, n_batches=30):
    """Monte Carlo standard error of the mean via batch means."""
    draws = np.asarray(draws, dtype=float)
    m = len(draws) // n_batches
    if m < 2:
        raise ValueError("too few draws for batch means")
    batches = draws[: m * n_batches].reshape(n_batches, m).mean(axis=1)
    return batches.std(ddof=1) / np.sqrt(n_batches)


def adjusted_rand_index(labels_a, labels_b):
    """Adjusted Rand index between two hard partitions."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    n = len(a)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    cont = np.zeros((len(ua), len(ub)), dtype=np.int64)
    for i in range(n):
        cont[ia[i], ib[i]] += 1

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_ij = comb2(cont).sum()
    sum_a = comb2(cont.sum(axis=1)).sum()
    sum_b = comb2(cont.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)


def silhouette(X, labels):
    """Mean silhouette coefficient of a labeled point configuration."""
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    n = len(X)
    diff = X[:, None, :] - X[None, :, :]
    D = np.sqrt((diff**2).sum(axis=2))
    scores = []
    for i in range(n):
        same = (labels == labels[i]) & (np.arange(n) != i)
        if not same.any():
            continue
        a = D[i, same].mean()
        b = min(
            D[i, labels == other].mean()
            for other in np.unique(labels)
            if other != labels[i]
        )
        scores.append((b - a) / max(a, b))
    return float(np.mean(scores))


def best_label_agreement(labels, truth):
    """Fraction of nodes matching under the best label permutation
    (for small label sets)."""
    import itertools

    labels = np.asarray(labels)
    truth = np.asarray(truth)
    cats = np.unique(labels)
    best = 0.0
    for perm in itertools.permutations(np.unique(truth), len(cats)):
        mapping = dict(zip(cats, perm))
        mapped = np.array([mapping[v] for v in labels])
        best = max(best, float(np.mean(mapped == truth)))
    return best
