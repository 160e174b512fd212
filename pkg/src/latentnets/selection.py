"""Model scoring over (G, d) and generative simulation.

The score of a fitted model combines two parts: a likelihood BIC at the
highest-posterior draw, whose parameter count includes the n*d position
values, and a finite-mixture BIC for the clustering structure of the
point-estimated (Procrustes-aligned posterior mean) positions. The parts
are reported separately and summed; scores are comparative, not
calibrated.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from . import models
from .inference import PosteriorSample, SamplerConfig, mcmc_fit
from .models import (
    GlobalParams,
    LatentState,
    MixtureParams,
    ModelSpec,
    PriorSpec,
    edge_probability_matrix,
)
from .network import Network
from .postprocess import align_sample, posterior_mean_positions

__all__ = [
    "ModelScore",
    "fit_spherical_gmm",
    "bic_score",
    "dic_score",
    "simulate_network",
    "scan",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class ModelScore:
    """Scores for one (G, d) cell of a model scan."""

    G: int
    d: int
    bic_likelihood: float
    bic_mixture: float
    bic_total: float
    dic: float
    sample: PosteriorSample | None = None
    seed: int = 0


# ---------------------------------------------------------------------------
# Spherical Gaussian mixture maximum likelihood (for the mixture BIC part)


def _gmm_log_likelihood(X, lam, mu, sigma2):
    d = X.shape[1]
    sq = cdist(X, mu, metric="sqeuclidean")
    logcomp = (
        np.log(lam)[None, :]
        - 0.5 * d * (_LOG_2PI + np.log(sigma2))[None, :]
        - 0.5 * sq / sigma2[None, :]
    )
    return float(logsumexp(logcomp, axis=1).sum()), logcomp


def fit_spherical_gmm(X, G, rng, n_init=8, max_iter=200, tol=1e-8):
    """Maximum-likelihood spherical Gaussian mixture via EM with seeded
    restarts; returns (lam, mu, sigma2, log_likelihood).

    Restarts that collapse a component onto a handful of points (the
    unbounded-likelihood degeneracy of Gaussian mixtures) are rejected;
    if every restart degenerates the fit fails with ``None``.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    if G < 1:
        raise ValueError("G must be >= 1")
    if G > n:
        raise ValueError("more components than points")

    var0 = max(float(X.var(axis=0).sum() / d), 1e-12)
    floor = 1e-6 * var0
    best = None
    for _ in range(n_init):
        centers = X[rng.choice(n, size=G, replace=False)].copy()
        lam = np.full(G, 1.0 / G)
        sigma2 = np.full(G, var0)
        ll_prev = -np.inf
        for _ in range(max_iter):
            ll, logcomp = _gmm_log_likelihood(X, lam, mu=centers, sigma2=sigma2)
            resp = np.exp(logcomp - logsumexp(logcomp, axis=1)[:, None])
            nk = resp.sum(axis=0)
            nk = np.maximum(nk, 1e-12)
            lam = nk / n
            centers = (resp.T @ X) / nk[:, None]
            sq = cdist(X, centers, metric="sqeuclidean")
            sigma2 = np.maximum((resp * sq).sum(axis=0) / (d * nk), floor)
            if abs(ll - ll_prev) < tol * max(1.0, abs(ll)):
                break
            ll_prev = ll
        ll, logcomp = _gmm_log_likelihood(X, lam, centers, sigma2)
        resp = np.exp(logcomp - logsumexp(logcomp, axis=1)[:, None])
        nk = resp.sum(axis=0)
        degenerate = bool(np.any(nk < d + 1.0) or np.any(sigma2 <= 2.0 * floor))
        if degenerate:
            continue
        if best is None or ll > best[3]:
            best = (lam, centers, sigma2, ll)
    return best


def _mixture_bic(X, G, seed):
    n, d = X.shape
    rng = np.random.default_rng(seed)
    fit = fit_spherical_gmm(X, G, rng)
    if fit is None:
        # the positions cannot support G non-degenerate components
        return np.inf
    k = (G - 1) + G * d + G
    return -2.0 * fit[3] + k * np.log(n)


# ---------------------------------------------------------------------------
# Scores


def _aligned(sample):
    if sample.aligned:
        return sample
    return align_sample(sample, sample.state_at(sample.map_index()))


def _free_parameter_count(g, spec):
    """Every free parameter: the n*d positions plus all non-position
    parameters, including the mixture parameters when active."""
    k = g.n * spec.dimensions + 1 + spec.covariates
    if spec.beta1_free:
        k += 1
    if spec.sociality_active:
        k += (2 * g.n if g.directed else g.n) + 1
    if spec.mixture_active:
        G = spec.clusters
        k += (G - 1) + G * spec.dimensions + G
    return k


def dic_score(g: Network, sample: PosteriorSample, spec: ModelSpec, x=None) -> float:
    """Deviance information criterion: mean deviance plus the effective
    parameter count (mean deviance minus the deviance of the posterior
    means evaluated on aligned mean positions)."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    aligned = _aligned(sample)
    d_bar = float(np.mean(-2.0 * aligned.log_likelihood))

    state = posterior_mean_positions(aligned)
    if aligned.sociality is not None:
        state.sociality = aligned.sociality.mean(axis=0)
    mixture = None
    if aligned.lam is not None:
        lam = aligned.lam.mean(axis=0)
        mixture = MixtureParams(
            lam / lam.sum(), aligned.mu.mean(axis=0), aligned.sigma2.mean(axis=0)
        )
    params = GlobalParams(
        alpha=float(aligned.alpha.mean()),
        beta=aligned.beta.mean(axis=0),
        beta1=float(aligned.beta1.mean()),
        mixture=mixture,
        sociality_variance=(
            float(aligned.sociality_variance.mean())
            if aligned.sociality_variance is not None
            else 1.0
        ),
    )
    d_hat = -2.0 * models.log_likelihood(g, state, params, spec, x)
    p_d = d_bar - d_hat
    return d_bar + p_d


def bic_score(g: Network, sample: PosteriorSample, spec: ModelSpec, x=None) -> ModelScore:
    """Two-part BIC of a fitted sample; both parts reported and summed."""
    if len(sample) == 0:
        raise ValueError("empty sample")
    aligned = _aligned(sample)
    map_k = aligned.map_index()
    loglik_hat = float(aligned.log_likelihood[map_k])
    k_lik = _free_parameter_count(g, spec)
    m = g.dyad_count
    bic_lik = -2.0 * loglik_hat + k_lik * np.log(m)

    mean_positions = posterior_mean_positions(aligned).Z
    G_eff = spec.clusters if spec.mixture_active else 1
    bic_mix = _mixture_bic(mean_positions, G_eff, seed=aligned.seed)

    return ModelScore(
        G=G_eff,
        d=spec.dimensions,
        bic_likelihood=float(bic_lik),
        bic_mixture=float(bic_mix),
        bic_total=float(bic_lik + bic_mix),
        dic=dic_score(g, aligned, spec, x),
        sample=aligned,
        seed=sample.seed,
    )


# ---------------------------------------------------------------------------
# Generative simulation


def simulate_network(
    spec: ModelSpec,
    n: int,
    params: GlobalParams | None = None,
    state: LatentState | None = None,
    prior: PriorSpec | None = None,
    seed: int = 0,
    directed: bool = False,
    x=None,
):
    """Draw a network from the generative model.

    Positions (and, when active, allocations, sociality effects, and
    mixture parameters) are drawn from the prior unless given explicitly.
    Each dyad is then an independent Bernoulli draw with logistic link.
    Deterministic for a fixed seed.
    """
    if n < 2:
        raise ValueError("need at least two nodes")
    prior = prior if prior is not None else PriorSpec()
    rng = np.random.default_rng(seed)
    params = params.copy() if params is not None else GlobalParams(beta=np.zeros(spec.covariates))

    if spec.mixture_active and params.mixture is None:
        G = spec.clusters
        lam = rng.dirichlet(np.full(G, prior.dirichlet_concentration))
        mu = np.sqrt(prior.cluster_mean_variance) * rng.standard_normal((G, spec.dimensions))
        sigma2 = prior.cluster_variance_scale / rng.gamma(prior.cluster_variance_shape, size=G)
        params.mixture = MixtureParams(lam / lam.sum(), mu, sigma2)

    if state is None:
        if spec.mixture_active:
            mix = params.mixture
            alloc = rng.choice(mix.G, size=n, p=mix.lam)
            Z = mix.mu[alloc] + np.sqrt(mix.sigma2[alloc])[:, None] * rng.standard_normal(
                (n, spec.dimensions)
            )
        else:
            alloc = None
            Z = np.sqrt(prior.position_variance) * rng.standard_normal((n, spec.dimensions))
        soc = None
        if spec.sociality_active:
            shape = (n, 2) if directed else (n,)
            soc = np.sqrt(params.sociality_variance) * rng.standard_normal(shape)
        state = LatentState(Z, allocations=alloc, sociality=soc)
    else:
        state = state.copy()

    p = edge_probability_matrix(state, params, spec, x)
    if directed:
        draws = rng.random((n, n)) < p
        np.fill_diagonal(draws, False)
        adj = draws.astype(np.uint8)
    else:
        upper = np.triu(rng.random((n, n)) < p, k=1)
        adj = (upper | upper.T).astype(np.uint8)
    g = Network(adj, directed=directed)
    return g, state, params


# ---------------------------------------------------------------------------
# Joint scan over cluster count and latent dimension


def _cell_seed(master_seed, G, d):
    ss = np.random.SeedSequence([int(master_seed), int(G), int(d)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] % (2**63))


def _fit_cell(g, G, d, prior, cfg, variant, beta1_free, x):
    spec = ModelSpec(
        variant=variant,
        dimensions=d,
        clusters=G if variant in ("lpcm", "lpcmre") else 0,
        covariates=0 if x is None else x.p,
        beta1_free=beta1_free,
    )
    seed = _cell_seed(cfg.seed, G, d)
    cell_cfg = replace(cfg, seed=seed)
    sample = mcmc_fit(g, spec, prior, cell_cfg, x=x)
    score = bic_score(g, sample, spec, x)
    score.seed = seed
    return score


def scan(
    g: Network,
    G_values,
    d_values,
    prior: PriorSpec,
    cfg: SamplerConfig,
    variant: str = "lpcm",
    beta1_free: bool | None = None,
    x=None,
    threads: int = 1,
):
    """Fit every (G, d) cell with an independent seeded chain and return
    the scores sorted by total BIC ascending (ties: smaller d, then
    smaller G). Failed cells are reported as warnings, not raised.

    ``beta1_free=False`` pins the distance coefficient to one; with a
    free coefficient the latent scale is only weakly identified, which
    adds noise to the mixture BIC part across cells.
    """
    G_values = sorted(set(int(G) for G in G_values))
    d_values = sorted(set(int(d) for d in d_values))
    if not G_values or not d_values:
        raise ValueError("G and d ranges must be nonempty")
    cells = [(G, d) for G in G_values for d in d_values]

    def run(cell):
        G, d = cell
        try:
            return _fit_cell(g, G, d, prior, cfg, variant, beta1_free, x)
        except Exception as exc:  # noqa: BLE001 - cell failures must not kill the scan
            warnings.warn(f"scan cell (G={G}, d={d}) failed: {exc}")
            return None

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, cells))
    else:
        results = [run(c) for c in cells]

    scores = [s for s in results if s is not None]
    scores.sort(key=lambda s: (s.bic_total, s.d, s.G))
    return scores
