"""Metropolis-within-Gibbs sampling, likelihood subsampling, and
two-step initialization.

One sweep of the sampler proposes, in turn, every node position from a
spherical Gaussian centered at its current value, every sociality effect
(when active), every global scalar, and finally refreshes the mixture
allocations and parameters by conjugate Gibbs steps. Position and
sociality acceptance ratios touch only the dyads incident to the updated
node, so a sweep costs O(n^2) likelihood terms overall.

All randomness flows through a single ``numpy.random.Generator``; runs
are bitwise reproducible for a fixed seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from . import models
from .errors import NumericalError
from .models import (
    GlobalParams,
    LatentState,
    MixtureParams,
    ModelSpec,
    PriorSpec,
    dyad_mask,
    eta_matrix,
)
from .network import Network, geodesic_distances

__all__ = [
    "SamplerConfig",
    "PosteriorSample",
    "classical_mds",
    "mle_initialize",
    "position_log_ratio",
    "update_positions",
    "update_sociality",
    "update_globals",
    "update_mixture",
    "allocation_probabilities",
    "case_control_loglik",
    "adapt_proposals",
    "mcmc_fit",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class SamplerConfig:
    """Chain length, proposal scales, adaptation, and seeding."""

    iterations: int = 5000
    burn_in: int = 1000
    thinning: int = 1
    proposal_sd_positions: float = 0.5
    proposal_sd_globals: float = 0.2
    adapt: bool = True
    target_accept_positions: float = 0.234
    target_accept_globals: float = 0.44
    seed: int = 0
    case_control: int | None = None
    prior_only: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0 <= self.burn_in < self.iterations):
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.proposal_sd_positions <= 0 or self.proposal_sd_globals <= 0:
            raise ValueError("proposal standard deviations must be positive")
        if self.case_control is not None and self.case_control < 1:
            raise ValueError("case_control must be >= 1 when set")

    @property
    def n_draws(self) -> int:
        return (self.iterations - self.burn_in) // self.thinning


@dataclass
class PosteriorSample:
    """Ordered posterior draws with acceptance and seeding metadata."""

    spec: ModelSpec
    config: SamplerConfig
    seed: int
    sweep_indices: np.ndarray
    positions: np.ndarray                 # (m, n, d)
    alpha: np.ndarray                     # (m,)
    beta: np.ndarray                      # (m, p)
    beta1: np.ndarray                     # (m,)
    log_likelihood: np.ndarray
    log_prior: np.ndarray
    log_posterior: np.ndarray
    acceptance: dict
    proposal_sds: dict
    sociality: np.ndarray | None = None
    sociality_variance: np.ndarray | None = None
    lam: np.ndarray | None = None
    mu: np.ndarray | None = None
    sigma2: np.ndarray | None = None
    allocations: np.ndarray | None = None
    aligned: bool = False

    def __len__(self):
        return self.positions.shape[0]

    @property
    def n(self):
        return self.positions.shape[1]

    @property
    def d(self):
        return self.positions.shape[2]

    def state_at(self, k) -> LatentState:
        return LatentState(
            self.positions[k].copy(),
            None if self.allocations is None else self.allocations[k].copy(),
            None if self.sociality is None else self.sociality[k].copy(),
        )

    def params_at(self, k) -> GlobalParams:
        mixture = None
        if self.lam is not None:
            mixture = MixtureParams(self.lam[k].copy(), self.mu[k].copy(), self.sigma2[k].copy())
        return GlobalParams(
            alpha=float(self.alpha[k]),
            beta=self.beta[k].copy(),
            beta1=float(self.beta1[k]),
            mixture=mixture,
            sociality_variance=(
                1.0 if self.sociality_variance is None else float(self.sociality_variance[k])
            ),
        )

    @property
    def draws(self):
        """Sequence of (LatentState, GlobalParams) tuples."""
        return [(self.state_at(k), self.params_at(k)) for k in range(len(self))]

    def map_index(self) -> int:
        """Index of the highest log-posterior draw."""
        return int(np.argmax(self.log_posterior))


# ---------------------------------------------------------------------------
# Classical multidimensional scaling and the two-step initializer


def classical_mds(D, d):
    """Embed a distance matrix into d dimensions by double centering.

    Eigenvalues below zero are truncated; if fewer than ``d`` positive
    eigenvalues exist the remaining coordinates are zero.
    """
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    if D.ndim != 2 or D.shape[1] != n:
        raise ValueError("distance matrix must be square")
    if not np.isfinite(D).all():
        raise ValueError("distance matrix must be finite")
    if not np.allclose(D, D.T):
        raise ValueError("distance matrix must be symmetric")
    if not np.allclose(np.diag(D), 0.0):
        raise ValueError("distance matrix must have a zero diagonal")
    if d < 1:
        raise ValueError("target dimension must be >= 1")

    sq = D * D
    row_mean = sq.mean(axis=1)
    B = -0.5 * (sq - row_mean[:, None] - row_mean[None, :] + sq.mean())
    k = min(d, n - 1)
    vals, vecs = eigh(B, subset_by_index=(n - k, n - 1))
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    coords = np.zeros((n, d))
    coords[:, :k] = vecs[:, order] * np.sqrt(vals)[None, :]
    return coords


def _initial_alpha(g, Z, spec, x=None):
    m = g.dyad_count
    dens = min(max(g.edge_count / m, 1.0 / (m + 1.0)), m / (m + 1.0))
    logit = math.log(dens / (1.0 - dens))
    mask = dyad_mask(g.n, g.directed)
    if spec.variant == "projection":
        norms = np.linalg.norm(Z, axis=1)
        offset = float(((Z @ Z.T) / norms[None, :])[mask].mean())
        return logit - offset
    return logit + float(cdist(Z, Z)[mask].mean())


def mle_initialize(g: Network, spec: ModelSpec, rng=None, max_iter=500):
    """Two-step starting point: classical MDS on geodesic hop counts,
    then gradient ascent on the log-likelihood over (Z, alpha) with
    backtracking line search, stopped at relative improvement < 1e-8.
    """
    if g.n < spec.dimensions + 1:
        raise ValueError("need at least d + 1 nodes to embed in d dimensions")
    if rng is None:
        rng = np.random.default_rng(0)

    D = geodesic_distances(g)
    if g.directed:
        D = 0.5 * (D + D.T)
    off = D[~np.eye(g.n, dtype=bool)]
    if np.allclose(off, off[0]):
        Z = 0.1 * rng.standard_normal((g.n, spec.dimensions))
    else:
        Z = classical_mds(D, spec.dimensions)
    if spec.variant == "projection":
        norms = np.linalg.norm(Z, axis=1)
        tiny = norms < 1e-8
        if tiny.any():
            Z[tiny] += 0.01 * rng.standard_normal((int(tiny.sum()), spec.dimensions))

    params = GlobalParams(alpha=_initial_alpha(g, Z, spec), beta=np.zeros(spec.covariates))
    state = LatentState(Z)

    def objective(Zc, alpha):
        st = LatentState(Zc)
        pr = GlobalParams(alpha=alpha, beta=params.beta, beta1=params.beta1)
        return models.log_likelihood(g, st, pr, spec)

    f = objective(state.Z, params.alpha)
    alpha = params.alpha
    Z = state.Z
    step = 1.0
    for _ in range(max_iter):
        grad = models.log_likelihood_gradient(
            g, LatentState(Z), GlobalParams(alpha=alpha, beta=params.beta, beta1=params.beta1), spec
        )
        gnorm2 = float(np.sum(grad.Z**2) + grad.alpha**2)
        if gnorm2 == 0.0:
            break
        step = min(1.0, 2.0 * step)  # warm-start the backtracking search
        f_new = -np.inf
        while step > 1e-12:
            f_new = objective(Z + step * grad.Z, alpha + step * grad.alpha)
            if f_new >= f + 1e-4 * step * gnorm2:
                break
            step *= 0.5
        if step <= 1e-12:
            break
        Z = Z + step * grad.Z
        alpha = alpha + step * grad.alpha
        rel = (f_new - f) / max(1.0, abs(f))
        f = f_new
        if rel < 1e-8:
            break

    sociality = np.zeros(g.n) if (spec.sociality_active and not g.directed) else None
    if spec.sociality_active and g.directed:
        sociality = np.zeros((g.n, 2))
    state = LatentState(Z, sociality=sociality)
    out = GlobalParams(alpha=alpha, beta=np.zeros(spec.covariates))
    return state, out


# ---------------------------------------------------------------------------
# Shared single-node machinery


def _softplus(x):
    return np.logaddexp(0.0, x)


def _lse(x):
    m = x.max()
    return float(m + math.log(np.exp(x - m).sum()))


def _position_prior_delta(z_new, z_old, params, prior, spec):
    if spec.mixture_active:
        m = params.mixture
        d = z_new.shape[0]
        const = np.log(m.lam) - 0.5 * d * (_LOG_2PI + np.log(m.sigma2))
        sq_new = np.sum((m.mu - z_new) ** 2, axis=1)
        sq_old = np.sum((m.mu - z_old) ** 2, axis=1)
        return _lse(const - 0.5 * sq_new / m.sigma2) - _lse(const - 0.5 * sq_old / m.sigma2)
    v = prior.position_variance
    return float((np.sum(z_old * z_old) - np.sum(z_new * z_new)) / (2.0 * v))


def _vector_delta(i, delta_eta, eta_vec, y_vec, cc=None, rng=None):
    """Log-likelihood change over one incident-dyad vector when its
    log-odds shift by ``delta_eta``; entry i must carry a zero shift.

    With case-control subsampling active (``cc`` is the per-node zero
    sample size), the delta keeps the node's edges exactly and reweights
    a uniform subsample of its zero dyads.
    """
    if cc is None:
        new = eta_vec + delta_eta
        return float(y_vec @ delta_eta - (_softplus(new).sum() - _softplus(eta_vec).sum()))
    edges = np.flatnonzero(y_vec)
    zeros = np.flatnonzero(y_vec == 0.0)
    zeros = zeros[zeros != i]
    de = delta_eta[edges]
    delta = float(de.sum() - (_softplus(eta_vec[edges] + de).sum() - _softplus(eta_vec[edges]).sum()))
    if zeros.size:
        m0 = min(cc, zeros.size)
        pick = _sample_without_replacement(zeros, m0, rng)
        w = zeros.size / m0
        dz = delta_eta[pick]
        delta += w * float(-(_softplus(eta_vec[pick] + dz).sum() - _softplus(eta_vec[pick]).sum()))
    return delta


def _node_likelihood_delta(i, delta_eta, eta, yf, directed, cc=None, rng=None):
    """Log-likelihood change when node i's row (and, if directed, column)
    log-odds shift by ``delta_eta``."""
    delta = _vector_delta(i, delta_eta, eta[i], yf[i], cc=cc, rng=rng)
    if directed:
        delta += _vector_delta(i, delta_eta, eta[:, i], yf[:, i], cc=cc, rng=rng)
    return delta


class _IncidenceLists:
    """Per-node edge and zero-dyad index lists.

    The adjacency is immutable, so these are cached on the network
    object after the first build.
    """

    def __init__(self, g):
        A = g.adjacency
        n = g.n
        others = [np.flatnonzero(np.arange(n) != i) for i in range(n)]
        self.out_edges = [np.flatnonzero(A[i]) for i in range(n)]
        self.out_zeros = [
            others[i][A[i, others[i]] == 0] for i in range(n)
        ]
        if g.directed:
            self.in_edges = [np.flatnonzero(A[:, i]) for i in range(n)]
            self.in_zeros = [others[i][A[others[i], i] == 0] for i in range(n)]


def _incidence(g):
    cached = getattr(g, "_incidence_cache", None)
    if cached is None:
        cached = _IncidenceLists(g)
        g._incidence_cache = cached
    return cached


def _sample_without_replacement(pool, k, rng):
    """Floyd's algorithm: k draws from ``pool`` in O(k) expected time."""
    n = pool.shape[0]
    if k >= n:
        return pool
    chosen = set()
    out = np.empty(k, dtype=pool.dtype)
    for j, t in enumerate(range(n - k, n)):
        r = int(rng.integers(0, t + 1))
        if r in chosen:
            r = t
        chosen.add(r)
        out[j] = pool[r]
    return out


def _cc_pair_components(state, params, x, i, idx, incoming):
    """Distance-family log-odds pieces at dyads (i, j in idx), excluding
    the distance term; ``incoming`` flips to the dyads (j, i)."""
    base = params.alpha  # scalar unless covariates or sociality apply
    if x is not None:
        base = base + (x.values[idx, i] if incoming else x.values[i, idx]) @ params.beta
    s = state.sociality
    if s is not None:
        if s.ndim == 1:
            base = base + s[i] + s[idx]
        elif incoming:
            base = base + s[idx, 0] + s[i, 1]
        else:
            base = base + s[i, 0] + s[idx, 1]
    return base


def _cc_position_delta(g, state, params, spec, x, inc, i, z_star, m0, rng):
    """Case-control likelihood delta for a distance-family position move,
    touching only the node's edges plus a fresh zero subsample."""
    Z = state.Z
    beta1 = params.beta1
    sides = [(inc.out_edges[i], inc.out_zeros[i], False)]
    if g.directed:
        sides.append((inc.in_edges[i], inc.in_zeros[i], True))
    delta = 0.0
    for edges, zeros, incoming in sides:
        if zeros.size:
            k = min(m0, zeros.size)
            pick = _sample_without_replacement(zeros, k, rng)
            w = zeros.size / k
        else:
            pick = zeros
            w = 0.0
        idx = np.concatenate([edges, pick])
        if idx.size == 0:
            continue
        sub = Z[idx]
        diff_c = sub - Z[i]
        d_c = np.sqrt(np.einsum("ij,ij->i", diff_c, diff_c))
        diff_n = sub - z_star
        d_n = np.sqrt(np.einsum("ij,ij->i", diff_n, diff_n))
        base = _cc_pair_components(state, params, x, i, idx, incoming)
        eta_c = base - beta1 * d_c
        eta_n = base - beta1 * d_n
        sp = _softplus(np.concatenate([eta_c, eta_n]))
        m = idx.size
        ne = edges.size
        delta += float(
            (eta_n[:ne] - eta_c[:ne]).sum() - (sp[m : m + ne].sum() - sp[:ne].sum())
        )
        if m > ne:
            delta += w * float(-(sp[m + ne :].sum() - sp[ne:m].sum()))
    return delta


def _cc_shift_delta(g, state, params, spec, x, inc, i, shift, m0, rng, side):
    """Case-control likelihood delta for adding ``shift`` to every
    incident log-odds of node i (sociality moves). ``side`` selects the
    outgoing row (0) or incoming column (1) for directed networks."""
    Z = state.Z
    incoming = side == 1
    edges = inc.in_edges[i] if incoming else inc.out_edges[i]
    zeros = inc.in_zeros[i] if incoming else inc.out_zeros[i]
    if zeros.size:
        k = min(m0, zeros.size)
        pick = _sample_without_replacement(zeros, k, rng)
        w = zeros.size / k
    else:
        pick = zeros
        w = 0.0
    idx = np.concatenate([edges, pick])
    if idx.size == 0:
        return 0.0
    diff = Z[idx] - Z[i]
    d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    base = _cc_pair_components(state, params, x, i, idx, incoming)
    eta_c = base - params.beta1 * d
    eta_n = eta_c + shift
    ne = edges.size
    delta = float(
        ne * shift - (_softplus(eta_n[:ne]).sum() - _softplus(eta_c[:ne]).sum())
    )
    if idx.size > ne:
        delta += w * float(-(_softplus(eta_n[ne:]).sum() - _softplus(eta_c[ne:]).sum()))
    return delta


def position_log_ratio(g, state, params, prior, spec, i, z_new, x=None, prior_only=False):
    """Log Metropolis ratio for moving node ``i`` to ``z_new``, computed
    from the node's full conditional (incident dyads only)."""
    delta = _position_prior_delta(np.asarray(z_new, float), state.Z[i], params, prior, spec)
    if prior_only:
        return delta
    eta = eta_matrix(state, params, spec, x)
    if spec.variant == "projection":
        d_row, d_col = _projection_eta_deltas(i, np.asarray(z_new, float), state.Z, params, x)
        if d_row is None:
            return -np.inf
        yf = g.adjacency.astype(np.float64)
        delta += _pair_delta_projection(i, d_row, d_col, eta, yf, g.directed)
    else:
        dist_new = np.linalg.norm(state.Z - np.asarray(z_new, float), axis=1)
        dist_new[i] = 0.0
        D = cdist(state.Z, state.Z)
        delta_eta = params.beta1 * (D[i] - dist_new)
        yf = g.adjacency.astype(np.float64)
        delta += _node_likelihood_delta(i, delta_eta, eta, yf, g.directed)
    return delta


def _projection_eta_deltas(i, z_new, Z, params, x):
    """Row and column log-odds changes for a projection-model move."""
    norms = np.linalg.norm(Z, axis=1)
    norm_new = float(np.linalg.norm(z_new))
    if norm_new == 0.0:
        return None, None  # proposal at the origin: reject
    dots_old = Z @ Z[i]
    dots_new = Z @ z_new
    d_row = (dots_new - dots_old) / norms  # eta[i, j] change
    d_col = dots_new / norm_new - dots_old / norms[i]  # eta[j, i] change
    d_row[i] = 0.0
    d_col[i] = 0.0
    return d_row, d_col


def _pair_delta_projection(i, d_row, d_col, eta, yf, directed, cc=None, rng=None):
    if directed:
        delta = _vector_delta(i, d_row, eta[i], yf[i], cc=cc, rng=rng)
        delta += _vector_delta(i, d_col, eta[:, i], yf[:, i], cc=cc, rng=rng)
        return delta
    # Undirected dyads {i, j} take the ordered form (min, max): the row
    # change applies for j > i, the column change for j < i.
    n = eta.shape[0]
    idx = np.arange(n)
    d_mix = np.where(idx > i, d_row, d_col)
    d_mix[i] = 0.0
    row = np.where(idx > i, eta[i], eta[:, i])
    return _vector_delta(i, d_mix, row, yf[i], cc=cc, rng=rng)


def _position_prior_cache(state, params, prior, spec):
    """Per-node prior log densities plus the pieces needed to score a
    proposed position without touching the other nodes."""
    Z = state.Z
    if spec.mixture_active:
        m = params.mixture
        d = Z.shape[1]
        const = np.log(m.lam) - 0.5 * d * (_LOG_2PI + np.log(m.sigma2))
        half_inv = 0.5 / m.sigma2
        sq = cdist(Z, m.mu, metric="sqeuclidean")
        dens = const[None, :] - sq * half_inv[None, :]
        mx = dens.max(axis=1)
        logdens = mx + np.log(np.exp(dens - mx[:, None]).sum(axis=1))

        def score(z):
            return _lse(const - np.sum((m.mu - z) ** 2, axis=1) * half_inv)

        return logdens, score
    v2 = 2.0 * prior.position_variance
    logdens = -np.einsum("ij,ij->i", Z, Z) / v2  # constants cancel in ratios

    def score(z):
        return float(-(z @ z) / v2)

    return logdens, score


def update_positions(
    g, state, params, prior, spec, x=None, *, proposal_sd, rng,
    prior_only=False, case_control=None,
):
    """One Metropolis step per node position; returns the updated state
    and the per-node acceptance flags."""
    state = state.copy()
    Z = state.Z
    n, d = Z.shape
    yf = g.adjacency.astype(np.float64)
    accepted = np.zeros(n, dtype=bool)
    prior_dens, prior_score = _position_prior_cache(state, params, prior, spec)

    if spec.variant == "projection":
        eta = eta_matrix(state, params, spec, x)
        for i in range(n):
            z_star = Z[i] + proposal_sd * rng.standard_normal(d)
            u = rng.random()
            d_row, d_col = _projection_eta_deltas(i, z_star, Z, params, x)
            if d_row is None:
                continue
            dens_new = prior_score(z_star)
            delta = dens_new - prior_dens[i]
            if not prior_only:
                delta += _pair_delta_projection(
                    i, d_row, d_col, eta, yf, g.directed, cc=case_control, rng=rng
                )
            if math.log(u) < delta:
                accepted[i] = True
                Z[i] = z_star
                prior_dens[i] = dens_new
                eta[i, :] += d_row
                eta[:, i] += d_col
                eta[i, i] = 0.0
        return state, accepted

    cc = case_control
    if cc is not None and not prior_only:
        # subquadratic path: only edges plus a fresh zero subsample per node
        inc = _incidence(g)
        for i in range(n):
            z_star = Z[i] + proposal_sd * rng.standard_normal(d)
            u = rng.random()
            dens_new = prior_score(z_star)
            delta = dens_new - prior_dens[i]
            delta += _cc_position_delta(g, state, params, spec, x, inc, i, z_star, cc, rng)
            if math.log(u) < delta:
                accepted[i] = True
                Z[i] = z_star
                prior_dens[i] = dens_new
        return state, accepted

    D = cdist(Z, Z)
    if prior_only:
        eta = sp = None
    else:
        eta = eta_matrix(state, params, spec, x)
        sp = _softplus(eta)
    beta1 = params.beta1
    directed = g.directed
    for i in range(n):
        z_star = Z[i] + proposal_sd * rng.standard_normal(d)
        u = rng.random()
        diff = Z - z_star
        dist_new = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        dist_new[i] = 0.0
        dens_new = prior_score(z_star)
        delta = dens_new - prior_dens[i]
        if not prior_only:
            delta_eta = beta1 * (D[i] - dist_new)
            new_row = eta[i] + delta_eta
            sp_new = _softplus(new_row)
            dlik = float(yf[i] @ delta_eta) - float(sp_new.sum() - sp[i].sum())
            if directed:
                new_col = eta[:, i] + delta_eta
                sp_new_col = _softplus(new_col)
                dlik += float(yf[:, i] @ delta_eta) - float(
                    sp_new_col.sum() - sp[:, i].sum()
                )
            delta += dlik
        if math.log(u) < delta:
            accepted[i] = True
            Z[i] = z_star
            prior_dens[i] = dens_new
            D[i, :] = dist_new
            D[:, i] = dist_new
            if not prior_only:
                eta[i, :] += delta_eta
                eta[:, i] += delta_eta
                eta[i, i] = 0.0
                sp[i, :] = sp_new
                sp[:, i] = sp_new_col if directed else sp_new
                sp[i, i] = _softplus(eta[i, i])
    return state, accepted


def update_sociality(
    g, state, params, prior, spec, x=None, *, proposal_sd, rng,
    prior_only=False, case_control=None,
):
    """Random-walk Metropolis on the per-node sociality effects."""
    if state.sociality is None:
        raise ValueError("state carries no sociality effects")
    state = state.copy()
    soc = state.sociality
    n = g.n
    yf = g.adjacency.astype(np.float64)
    cc = case_control if not prior_only else None
    eta = None if (prior_only or cc is not None) else eta_matrix(state, params, spec, x)
    inc = _incidence(g) if cc is not None else None
    s2 = params.sociality_variance

    if not g.directed:
        accepted = np.zeros(n, dtype=bool)
        for i in range(n):
            e = proposal_sd * rng.standard_normal()
            u = rng.random()
            s_new = soc[i] + e
            delta = (soc[i] ** 2 - s_new**2) / (2.0 * s2)
            if cc is not None:
                delta += _cc_shift_delta(g, state, params, spec, x, inc, i, e, cc, rng, side=0)
            elif not prior_only:
                delta_eta = np.full(n, e)
                delta_eta[i] = 0.0
                delta += _vector_delta(i, delta_eta, eta[i], yf[i])
            if math.log(u) < delta:
                accepted[i] = True
                soc[i] = s_new
                if eta is not None:
                    eta[i, :] += e
                    eta[:, i] += e
                    eta[i, i] = 0.0
        return state, accepted

    accepted = np.zeros((n, 2), dtype=bool)
    for i in range(n):
        for side in (0, 1):  # sender effect touches row i, receiver column i
            e = proposal_sd * rng.standard_normal()
            u = rng.random()
            s_new = soc[i, side] + e
            delta = (soc[i, side] ** 2 - s_new**2) / (2.0 * s2)
            if cc is not None:
                delta += _cc_shift_delta(g, state, params, spec, x, inc, i, e, cc, rng, side=side)
            elif not prior_only:
                vec = eta[i] if side == 0 else eta[:, i]
                y_side = yf[i] if side == 0 else yf[:, i]
                delta_eta = np.full(n, e)
                delta_eta[i] = 0.0
                delta += _vector_delta(i, delta_eta, vec, y_side)
            if math.log(u) < delta:
                accepted[i, side] = True
                soc[i, side] = s_new
                if eta is not None:
                    if side == 0:
                        eta[i, :] += e
                    else:
                        eta[:, i] += e
                    eta[i, i] = 0.0
    return state, accepted


# ---------------------------------------------------------------------------
# Global scalar updates


def scalar_log_ratio(
    g, state, params, prior, spec, name, shift, x=None, k=0,
    prior_only=False, cc_sample=None,
):
    """Log Metropolis ratio for shifting one global scalar.

    ``name`` is one of "alpha", "beta" (coefficient ``k``), "beta1"
    (shift applied on the log scale), or "sociality_variance" (log scale
    as well). The likelihood part touches every dyad; the transformed
    scalars carry their log-scale Jacobian.
    """
    v = prior.global_variance
    shifted = params.copy()
    delta_eta = None
    if name == "alpha":
        prior_delta = (params.alpha**2 - (params.alpha + shift) ** 2) / (2.0 * v)
        delta_eta = float(shift)
        shifted.alpha += shift
    elif name == "beta":
        b = params.beta[k]
        prior_delta = (b**2 - (b + shift) ** 2) / (2.0 * v)
        delta_eta = shift * x.values[:, :, k]
        shifted.beta[k] += shift
    elif name == "beta1":
        w = math.log(params.beta1)
        w_new = w + shift
        prior_delta = (w**2 - w_new**2) / (2.0 * v)  # normal prior on the log scale
        shifted.beta1 = math.exp(w_new)
        if cc_sample is None:
            delta_eta = -(shifted.beta1 - params.beta1) * cdist(state.Z, state.Z)
    elif name == "sociality_variance":
        soc = state.sociality
        a, b = prior.sociality_shape, prior.sociality_scale

        def log_target(val):
            dens = float(np.sum(-0.5 * (_LOG_2PI + np.log(val)) - 0.5 * soc**2 / val))
            ig = -(a + 1.0) * math.log(val) - b / val
            return dens + ig + math.log(val)  # Jacobian of the log transform

        s2 = params.sociality_variance
        return log_target(s2 * math.exp(shift)) - log_target(s2)
    else:
        raise ValueError(f"unknown scalar {name!r}")

    if prior_only:
        return float(prior_delta)
    if cc_sample is not None:
        lik = _cc_loglik(state, shifted, spec, x, cc_sample) - _cc_loglik(
            state, params, spec, x, cc_sample
        )
        return float(prior_delta + lik)
    eta = eta_matrix(state, params, spec, x)
    mask = dyad_mask(g.n, g.directed)
    eta_v = eta[mask]
    y_v = g.adjacency[mask].astype(np.float64)
    de_v = delta_eta if np.isscalar(delta_eta) else delta_eta[mask]
    new = eta_v + de_v
    lik = float(np.sum(y_v * de_v) - (_softplus(new).sum() - _softplus(eta_v).sum()))
    return float(prior_delta + lik)


def update_globals(
    g, state, params, prior, spec, x=None, *, proposal_sds, rng,
    prior_only=False, case_control=None,
):
    """Random-walk Metropolis on each global scalar in a fixed order:
    alpha, each covariate coefficient, the free distance coefficient on
    the log scale, and the sociality variance on the log scale."""
    params = params.copy()
    accepted = {}

    def step(name, sd, k=0):
        shift = sd * rng.standard_normal()
        u = rng.random()
        cc_sample = None
        if case_control is not None and not prior_only and name != "sociality_variance":
            cc_sample = _case_control_sample(g, case_control, rng)
        r = scalar_log_ratio(
            g, state, params, prior, spec, name, shift, x=x, k=k,
            prior_only=prior_only, cc_sample=cc_sample,
        )
        return shift, math.log(u) < r

    shift, ok = step("alpha", proposal_sds["alpha"])
    if ok:
        params.alpha += shift
    accepted["alpha"] = ok

    beta_acc = []
    for k in range(params.beta.size):
        shift, ok = step("beta", proposal_sds["beta"][k], k=k)
        if ok:
            params.beta[k] += shift
        beta_acc.append(ok)
    accepted["beta"] = np.asarray(beta_acc, dtype=bool)

    if spec.beta1_free:
        shift, ok = step("beta1", proposal_sds["beta1"])
        if ok:
            params.beta1 = math.exp(math.log(params.beta1) + shift)
        accepted["beta1"] = ok

    if spec.sociality_active:
        shift, ok = step("sociality_variance", proposal_sds["sociality_variance"])
        if ok:
            params.sociality_variance *= math.exp(shift)
        accepted["sociality_variance"] = ok

    return params, accepted


# ---------------------------------------------------------------------------
# Mixture allocations and conjugate parameter refresh


def allocation_probabilities(Z, mixture):
    """Per-node allocation probabilities, proportional to
    lam_g * N(z_i; mu_g, sigma2_g I); rows sum to one."""
    d = Z.shape[1]
    sq = cdist(Z, mixture.mu, metric="sqeuclidean")
    logp = (
        np.log(mixture.lam)[None, :]
        - 0.5 * d * (_LOG_2PI + np.log(mixture.sigma2))[None, :]
        - 0.5 * sq / mixture.sigma2[None, :]
    )
    logp -= logsumexp(logp, axis=1)[:, None]
    return np.exp(logp)


def update_mixture(state, mixture, prior, rng):
    """Gibbs refresh of allocations, weights, centers, and variances.

    Allocations are drawn from their exact conditional; the weights get a
    Dirichlet update, each center a Gaussian update, and each variance an
    inverse-gamma update. Empty components are resampled from their
    hyperpriors and kept.
    """
    Z = state.Z
    n, d = Z.shape
    G = mixture.G
    probs = allocation_probabilities(Z, mixture)
    u = rng.random((n, 1))
    alloc = np.minimum((probs.cumsum(axis=1) < u).sum(axis=1), G - 1)

    counts = np.bincount(alloc, minlength=G)
    lam = rng.dirichlet(prior.dirichlet_concentration + counts)

    omega2 = prior.cluster_mean_variance
    a, b = prior.cluster_variance_shape, prior.cluster_variance_scale
    mu = np.empty((G, d))
    sigma2 = np.empty(G)
    for gcomp in range(G):
        members = Z[alloc == gcomp]
        if members.shape[0] == 0:
            mu[gcomp] = math.sqrt(omega2) * rng.standard_normal(d)
            sigma2[gcomp] = b / rng.gamma(a)
            continue
        ng = members.shape[0]
        prec = 1.0 / omega2 + ng / mixture.sigma2[gcomp]
        mean = (members.sum(axis=0) / mixture.sigma2[gcomp]) / prec
        mu[gcomp] = mean + math.sqrt(1.0 / prec) * rng.standard_normal(d)
        shape = a + 0.5 * ng * d
        scale = b + 0.5 * float(np.sum((members - mu[gcomp]) ** 2))
        sigma2[gcomp] = scale / rng.gamma(shape)

    lam = lam / lam.sum()  # guard the 1e-12 simplex invariant
    return alloc, MixtureParams(lam, mu, sigma2)


# ---------------------------------------------------------------------------
# Case-control likelihood estimator


def _eta_pairs(state, params, spec, x, rows, cols):
    """Log-odds at the listed ordered dyads, O(len(rows) * d)."""
    Z = state.Z
    eta = np.full(rows.shape[0], params.alpha)
    if x is not None:
        eta += x.values[rows, cols] @ params.beta
    if spec.variant == "projection":
        norms = np.linalg.norm(Z[cols], axis=1)
        if np.any(norms == 0.0):
            raise ValueError("projection direction undefined: a position is at the origin")
        eta += np.einsum("ij,ij->i", Z[rows], Z[cols]) / norms
        return eta
    diff = Z[rows] - Z[cols]
    eta -= params.beta1 * np.sqrt(np.einsum("ij,ij->i", diff, diff))
    if state.sociality is not None:
        s = state.sociality
        if s.ndim == 1:
            eta += s[rows] + s[cols]
        else:
            eta += s[rows, 0] + s[cols, 1]
    return eta


def _case_control_sample(g, m0, rng):
    """One draw of the estimator's index set.

    Returns (edge_rows, edge_cols, zero_rows, zero_cols, weights): the
    full edge list plus, per node, a uniform without-replacement sample
    of its zero dyads, each weighted by (zero count) / (sample size),
    halved for undirected networks where the per-node strata cover every
    dyad twice.
    """
    A = g.adjacency
    n = g.n
    inc = _incidence(g)
    if g.directed:
        edge_rows, edge_cols = np.nonzero(A)
    else:
        edge_rows, edge_cols = np.nonzero(np.triu(A, k=1))
    rows, cols, weights = [], [], []
    half = 1.0 if g.directed else 0.5
    for i in range(n):
        zeros = inc.out_zeros[i]
        if zeros.size == 0:
            continue
        k = min(m0, zeros.size)
        pick = _sample_without_replacement(zeros, k, rng)
        rows.append(np.full(k, i))
        cols.append(pick)
        weights.append(np.full(k, half * zeros.size / k))
    if rows:
        zero_rows = np.concatenate(rows)
        zero_cols = np.concatenate(cols)
        w = np.concatenate(weights)
    else:
        zero_rows = zero_cols = np.zeros(0, dtype=int)
        w = np.zeros(0)
    return edge_rows, edge_cols, zero_rows, zero_cols, w


def _cc_loglik(state, params, spec, x, sample):
    edge_rows, edge_cols, zero_rows, zero_cols, weights = sample
    total = 0.0
    if edge_rows.size:
        e = _eta_pairs(state, params, spec, x, edge_rows, edge_cols)
        total += float(e.sum() - _softplus(e).sum())
    if zero_rows.size:
        e0 = _eta_pairs(state, params, spec, x, zero_rows, zero_cols)
        total -= float(weights @ _softplus(e0))
    return total


def case_control_loglik(g, state, params, spec, x=None, *, m0, rng):
    """Unbiased log-likelihood estimate: edges enter exactly, and each
    node contributes a reweighted uniform subsample of ``m0`` of its
    zero dyads. Costs O(edges + n * m0) likelihood terms."""
    if m0 < 1:
        raise ValueError("m0 must be >= 1")
    sample = _case_control_sample(g, m0, rng)
    return _cc_loglik(state, params, spec, x, sample)


# ---------------------------------------------------------------------------
# Proposal adaptation


def adapt_proposals(proposal_sds, acceptance, sweep, cfg):
    """Robbins-Monro rescaling of the proposal scales toward the target
    acceptance rates; call only during burn-in."""
    step = min(1.0, (sweep + 1.0) ** -0.6)
    out = dict(proposal_sds)

    def scaled(sd, rate, target):
        return float(np.clip(sd * math.exp(step * (rate - target)), 1e-4, 1e3))

    tp = cfg.target_accept_positions
    tg = cfg.target_accept_globals
    for key, rate in acceptance.items():
        if key not in out:
            continue
        if key == "beta":
            rates = np.atleast_1d(rate).astype(float)
            out["beta"] = np.array(
                [scaled(out["beta"][k], rates[k], tg) for k in range(len(out["beta"]))]
            )
        elif key in ("positions", "sociality"):
            out[key] = scaled(out[key], float(np.mean(rate)), tp)
        else:
            out[key] = scaled(out[key], float(np.mean(rate)), tg)
    return out


# ---------------------------------------------------------------------------
# The full sampler


def _init_proposal_sds(spec, cfg):
    sds = {
        "positions": cfg.proposal_sd_positions,
        "alpha": cfg.proposal_sd_globals,
        "beta": np.full(spec.covariates, cfg.proposal_sd_globals),
    }
    if spec.beta1_free:
        sds["beta1"] = cfg.proposal_sd_globals
    if spec.sociality_active:
        sds["sociality"] = cfg.proposal_sd_globals
        sds["sociality_variance"] = cfg.proposal_sd_globals
    return sds


def _prepare_initial_values(g, spec, prior, cfg, init_state, init_params, x, rng):
    if init_state is None or init_params is None:
        state, params = mle_initialize(g, spec, rng=rng)
        if init_state is not None:
            state = init_state.copy()
        if init_params is not None:
            params = init_params.copy()
    else:
        state, params = init_state.copy(), init_params.copy()

    if spec.sociality_active and state.sociality is None:
        state.sociality = np.zeros(g.n) if not g.directed else np.zeros((g.n, 2))
    if spec.mixture_active:
        if params.mixture is None:
            G = spec.clusters
            lam = rng.dirichlet(np.full(G, prior.dirichlet_concentration))
            mu = math.sqrt(prior.cluster_mean_variance) * rng.standard_normal((G, spec.dimensions))
            sigma2 = prior.cluster_variance_scale / rng.gamma(
                prior.cluster_variance_shape, size=G
            )
            params.mixture = MixtureParams(lam / lam.sum(), mu, sigma2)
        if state.allocations is None:
            alloc, mixture = update_mixture(state, params.mixture, prior, rng)
            state.allocations = alloc
            params.mixture = mixture
    return state, params


def mcmc_fit(
    g: Network,
    spec: ModelSpec,
    prior: PriorSpec,
    cfg: SamplerConfig,
    init_state: LatentState | None = None,
    init_params: GlobalParams | None = None,
    x=None,
) -> PosteriorSample:
    """Run the Metropolis-within-Gibbs sampler and return the retained
    draws. Deterministic for a fixed ``cfg.seed``."""
    if x is not None:
        x.validate_for(g)
        if x.p != spec.covariates:
            raise ValueError(f"spec declares {spec.covariates} covariates, x has {x.p}")
    elif spec.covariates:
        raise ValueError("spec declares covariates but none were given")

    rng = np.random.default_rng(cfg.seed)
    state, params = _prepare_initial_values(g, spec, prior, cfg, init_state, init_params, x, rng)

    lp0 = models.log_prior(state, params, prior, spec)
    if not cfg.prior_only:
        lp0 += models.log_likelihood(g, state, params, spec, x)
    if not np.isfinite(lp0):
        raise NumericalError("non-finite posterior at initialization")

    sds = _init_proposal_sds(spec, cfg)
    m = cfg.n_draws
    n, d, p = g.n, spec.dimensions, spec.covariates
    out = {
        "sweep_indices": np.zeros(m, dtype=np.int64),
        "positions": np.zeros((m, n, d)),
        "alpha": np.zeros(m),
        "beta": np.zeros((m, p)),
        "beta1": np.zeros(m),
        "log_likelihood": np.zeros(m),
        "log_prior": np.zeros(m),
        "log_posterior": np.zeros(m),
    }
    if spec.sociality_active:
        out["sociality"] = np.zeros((m,) + state.sociality.shape)
        out["sociality_variance"] = np.zeros(m)
    if spec.mixture_active:
        G = spec.clusters
        out["lam"] = np.zeros((m, G))
        out["mu"] = np.zeros((m, G, d))
        out["sigma2"] = np.zeros((m, G))
        out["allocations"] = np.zeros((m, n), dtype=np.int64)

    acc_totals = {k: 0.0 for k in ("positions", "sociality", "alpha", "beta", "beta1", "sociality_variance")}
    acc_counts = {k: 0 for k in acc_totals}
    kept = 0

    for sweep in range(1, cfg.iterations + 1):
        state, acc_pos = update_positions(
            g, state, params, prior, spec, x,
            proposal_sd=sds["positions"], rng=rng,
            prior_only=cfg.prior_only, case_control=cfg.case_control,
        )
        sweep_acc = {"positions": float(np.mean(acc_pos))}

        if spec.sociality_active:
            state, acc_soc = update_sociality(
                g, state, params, prior, spec, x,
                proposal_sd=sds["sociality"], rng=rng,
                prior_only=cfg.prior_only, case_control=cfg.case_control,
            )
            sweep_acc["sociality"] = float(np.mean(acc_soc))

        params, acc_glob = update_globals(
            g, state, params, prior, spec, x,
            proposal_sds=sds, rng=rng,
            prior_only=cfg.prior_only, case_control=cfg.case_control,
        )
        sweep_acc["alpha"] = float(acc_glob["alpha"])
        if p:
            sweep_acc["beta"] = acc_glob["beta"].astype(float)
        if spec.beta1_free:
            sweep_acc["beta1"] = float(acc_glob["beta1"])
        if spec.sociality_active:
            sweep_acc["sociality_variance"] = float(acc_glob["sociality_variance"])

        if spec.mixture_active:
            alloc, mixture = update_mixture(state, params.mixture, prior, rng)
            state.allocations = alloc
            params.mixture = mixture

        if cfg.adapt and sweep <= cfg.burn_in:
            sds = adapt_proposals(sds, sweep_acc, sweep, cfg)

        if sweep > cfg.burn_in:
            for key, val in sweep_acc.items():
                acc_totals[key] += float(np.mean(val))
                acc_counts[key] += 1
            if (sweep - cfg.burn_in) % cfg.thinning == 0 and kept < m:
                out["sweep_indices"][kept] = sweep
                out["positions"][kept] = state.Z
                out["alpha"][kept] = params.alpha
                out["beta"][kept] = params.beta
                out["beta1"][kept] = params.beta1
                if spec.sociality_active:
                    out["sociality"][kept] = state.sociality
                    out["sociality_variance"][kept] = params.sociality_variance
                if spec.mixture_active:
                    out["lam"][kept] = params.mixture.lam
                    out["mu"][kept] = params.mixture.mu
                    out["sigma2"][kept] = params.mixture.sigma2
                    out["allocations"][kept] = state.allocations
                ll = 0.0 if cfg.prior_only else models.log_likelihood(g, state, params, spec, x)
                lpr = models.log_prior(state, params, prior, spec)
                out["log_likelihood"][kept] = ll
                out["log_prior"][kept] = lpr
                out["log_posterior"][kept] = ll + lpr
                kept += 1

    acceptance = {
        k: (acc_totals[k] / acc_counts[k]) for k in acc_totals if acc_counts[k] > 0
    }
    final_sds = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in sds.items()}
    return PosteriorSample(
        spec=spec,
        config=cfg,
        seed=cfg.seed,
        sweep_indices=out["sweep_indices"],
        positions=out["positions"],
        alpha=out["alpha"],
        beta=out["beta"],
        beta1=out["beta1"],
        log_likelihood=out["log_likelihood"],
        log_prior=out["log_prior"],
        log_posterior=out["log_posterior"],
        acceptance=acceptance,
        proposal_sds=final_sds,
        sociality=out.get("sociality"),
        sociality_variance=out.get("sociality_variance"),
        lam=out.get("lam"),
        mu=out.get("mu"),
        sigma2=out.get("sigma2"),
        allocations=out.get("allocations"),
    )
