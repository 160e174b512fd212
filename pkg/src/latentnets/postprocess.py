"""Procrustes alignment of posterior draws and identifiable summaries.

The likelihood of a distance-family model only sees the positions through
their pairwise distances, so every draw is arbitrary up to rotation,
reflection, and translation. Summaries such as the posterior mean are
therefore computed after matching each draw to a common reference
configuration; the projection variant is matched by rotation/reflection
only, since translations change its likelihood.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .inference import PosteriorSample
from .models import LatentState

__all__ = [
    "AlignmentResult",
    "procrustes_align",
    "align_sample",
    "posterior_mean_positions",
    "cluster_summary",
]


@dataclass(frozen=True)
class AlignmentResult:
    """Optimal orthogonal matrix, translation, and residual sum of
    squares for one configuration pair."""

    O: np.ndarray  # (d, d) orthogonal; includes reflections
    t: np.ndarray  # (d,) translation, zero when translation is disallowed
    r2: float      # minimized sum of squared distances


def procrustes_align(A, B, allow_translation=True):
    """Match configuration ``A`` to the reference ``B``.

    Minimizes ``sum_i |b_i - (O' a_i + t)|^2`` over orthogonal ``O``
    (rotations and reflections) and, when ``allow_translation`` is True,
    over translations ``t``. The solution is closed form: center both
    configurations (translation mode only) and take the singular value
    decomposition of the cross-covariance matrix.

    Returns
    -------
    result : AlignmentResult
    aligned : ndarray of shape (n, d)
        ``A`` carried through the optimal transform.
    """
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape != B.shape:
        raise ValueError(f"shape mismatch: {A.shape} vs {B.shape}")
    if A.ndim != 2:
        raise ValueError("configurations must be 2-d arrays")
    n, d = A.shape
    if n < d:
        raise ValueError("need at least as many points as dimensions")

    if allow_translation:
        a_bar = A.mean(axis=0)
        b_bar = B.mean(axis=0)
        Ac = A - a_bar
        Bc = B - b_bar
    else:
        Ac, Bc = A, B

    U, _, Vt = np.linalg.svd(Ac.T @ Bc)
    R = U @ Vt  # rows of A map through R; equals the O of a_i' = O' a_i
    aligned_c = Ac @ R
    if allow_translation:
        t = b_bar - R.T @ a_bar
        aligned = aligned_c + b_bar
    else:
        t = np.zeros(d)
        aligned = aligned_c
    r2 = float(np.sum((Bc - aligned_c) ** 2))
    return AlignmentResult(O=R, t=t, r2=r2), aligned


def align_sample(sample: PosteriorSample, reference: LatentState) -> PosteriorSample:
    """Replace every draw's positions by their Procrustes match to the
    reference configuration; global parameters are untouched.

    Translation is allowed for distance-family variants and disallowed
    for the projection variant.
    """
    ref = np.asarray(reference.Z, dtype=np.float64)
    if ref.shape != sample.positions.shape[1:]:
        raise ValueError("reference shape does not match the draws")
    allow_t = sample.spec.variant != "projection"
    aligned = np.empty_like(sample.positions)
    for k in range(len(sample)):
        _, aligned[k] = procrustes_align(sample.positions[k], ref, allow_translation=allow_t)
    return replace(sample, positions=aligned, aligned=True)


def posterior_mean_positions(sample: PosteriorSample) -> LatentState:
    """Coordinate-wise mean of the (aligned) draws."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    return LatentState(sample.positions.mean(axis=0))


def posterior_sd_positions(sample: PosteriorSample) -> np.ndarray:
    """Coordinate-wise standard deviation of the (aligned) draws."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    return sample.positions.std(axis=0)


def cluster_summary(sample: PosteriorSample):
    """Label-invariant clustering summary of the mixture allocations.

    Returns the pairwise co-allocation frequency matrix and a hard
    partition obtained by cutting a complete-linkage dendrogram of
    (1 - frequency) at 0.5. Partition labels are renumbered in order of
    first appearance.
    """
    if sample.allocations is None:
        raise ValueError("sample carries no allocations")
    alloc = sample.allocations
    m, n = alloc.shape
    co = np.zeros((n, n))
    for k in range(m):
        co += alloc[k][:, None] == alloc[k][None, :]
    co /= m

    if n == 1:
        return co, np.zeros(1, dtype=np.int64)
    dist = 1.0 - co
    np.fill_diagonal(dist, 0.0)
    tree = linkage(squareform(dist, checks=False), method="complete")
    raw = fcluster(tree, t=0.5, criterion="distance")
    labels = np.empty(n, dtype=np.int64)
    seen: dict[int, int] = {}
    for i, lab in enumerate(raw):
        if lab not in seen:
            seen[lab] = len(seen)
        labels[i] = seen[lab]
    return co, labels
