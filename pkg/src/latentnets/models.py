"""Log-odds kernels, likelihood, and prior densities for the model family.

Four variants share one parameter surface:

* ``distance``    log-odds of a tie: alpha + beta'x_ij - |z_i - z_j|
* ``projection``  log-odds: alpha + beta'x_ij + (z_i'z_j) / |z_j|
* ``lpcm``        distance form with a free nonnegative distance
                  coefficient beta1 and a Gaussian-mixture position prior
* ``lpcmre``      lpcm plus per-node sociality random effects

`|.|` is the Euclidean norm throughout. Conditionally on the latent
positions, dyads are independent Bernoulli variables with logistic link,
so the log-likelihood is a sum over dyads (unordered when the network is
undirected, ordered otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import expit, gammaln, logsumexp

from .network import Network

__all__ = [
    "VARIANTS",
    "ModelSpec",
    "PriorSpec",
    "MixtureParams",
    "GlobalParams",
    "LatentState",
    "edge_probability",
    "eta_distance",
    "eta_projection",
    "eta_matrix",
    "edge_probability_matrix",
    "dyad_mask",
    "log_likelihood",
    "log_prior",
    "log_prior_positions",
    "log_posterior",
    "Gradient",
    "log_likelihood_gradient",
    "log_posterior_gradient",
]

VARIANTS = ("distance", "projection", "lpcm", "lpcmre")

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ModelSpec:
    """Which model variant to fit and its structural dimensions.

    ``beta1_free`` selects the parameterization of the distance term:
    a free nonnegative coefficient (sampled on the log scale) when True,
    a unit coefficient with ``alpha`` acting as the intercept when False.
    Defaults to True for the ``lpcm`` variant and False otherwise.
    """

    variant: str
    dimensions: int = 2
    clusters: int = 0
    covariates: int = 0
    beta1_free: bool | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.dimensions < 1:
            raise ValueError("dimensions must be >= 1")
        if self.covariates < 0:
            raise ValueError("covariates must be >= 0")
        if self.mixture_active and self.clusters < 1:
            raise ValueError(f"variant {self.variant!r} requires clusters >= 1")
        if self.beta1_free is None:
            object.__setattr__(self, "beta1_free", self.variant == "lpcm")
        if self.variant == "projection" and self.beta1_free:
            raise ValueError("the projection variant has no distance coefficient")

    @property
    def mixture_active(self) -> bool:
        return self.variant in ("lpcm", "lpcmre")

    @property
    def sociality_active(self) -> bool:
        return self.variant == "lpcmre"


@dataclass(frozen=True)
class PriorSpec:
    """Prior hyperparameters.

    Positions get a spherical Gaussian prior N(0, position_variance * I)
    unless a mixture is active, in which case the mixture components get
    a Dirichlet / Gaussian / inverse-gamma hyperprior. Global scalars get
    independent N(0, global_variance) priors; the free distance
    coefficient is log-normal with the same log-scale variance. Sociality
    effects are N(0, s2) with an inverse-gamma hyperprior on s2.
    """

    position_variance: float = 1.0
    global_variance: float = 4.0
    dirichlet_concentration: float = 1.0
    cluster_mean_variance: float = 4.0
    cluster_variance_shape: float = 2.0
    cluster_variance_scale: float = 1.0
    sociality_shape: float = 2.0
    sociality_scale: float = 1.0

    def __post_init__(self):
        for name in (
            "position_variance",
            "global_variance",
            "dirichlet_concentration",
            "cluster_mean_variance",
            "cluster_variance_shape",
            "cluster_variance_scale",
            "sociality_shape",
            "sociality_scale",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class MixtureParams:
    """Finite spherical Gaussian mixture over the latent space."""

    lam: np.ndarray   # (G,) component probabilities, sum to one
    mu: np.ndarray    # (G, d) component centers
    sigma2: np.ndarray  # (G,) spherical component variances

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        self.mu = np.atleast_2d(np.asarray(self.mu, dtype=np.float64))
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64)
        G = self.lam.shape[0]
        if self.mu.shape[0] != G or self.sigma2.shape[0] != G:
            raise ValueError("mixture parameter shapes disagree on G")
        if np.any(self.lam < 0) or abs(self.lam.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be nonnegative and sum to 1")
        if np.any(self.sigma2 <= 0):
            raise ValueError("mixture variances must be positive")

    @property
    def G(self) -> int:
        return self.lam.shape[0]

    def copy(self) -> "MixtureParams":
        return MixtureParams(self.lam.copy(), self.mu.copy(), self.sigma2.copy())


@dataclass
class GlobalParams:
    """Scalar parameters shared across dyads."""

    alpha: float = 0.0
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    beta1: float = 1.0
    mixture: MixtureParams | None = None
    sociality_variance: float = 1.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64).reshape(-1)
        if self.beta1 < 0:
            raise ValueError("the distance coefficient beta1 must be nonnegative")
        if self.sociality_variance <= 0:
            raise ValueError("sociality_variance must be positive")

    def copy(self) -> "GlobalParams":
        return GlobalParams(
            alpha=self.alpha,
            beta=self.beta.copy(),
            beta1=self.beta1,
            mixture=None if self.mixture is None else self.mixture.copy(),
            sociality_variance=self.sociality_variance,
        )


@dataclass
class LatentState:
    """Per-node latent quantities: positions, cluster labels, sociality.

    ``sociality`` has shape (n,) for undirected networks (one symmetric
    effect per node entering as s_i + s_j) and (n, 2) for directed ones
    (sender effect in column 0, receiver effect in column 1).
    """

    Z: np.ndarray
    allocations: np.ndarray | None = None
    sociality: np.ndarray | None = None

    def __post_init__(self):
        self.Z = np.atleast_2d(np.asarray(self.Z, dtype=np.float64))
        if not np.isfinite(self.Z).all():
            raise ValueError("latent positions must be finite")
        if self.allocations is not None:
            self.allocations = np.asarray(self.allocations, dtype=np.int64).reshape(-1)
            if self.allocations.shape[0] != self.Z.shape[0]:
                raise ValueError("allocations length must equal node count")
        if self.sociality is not None:
            self.sociality = np.asarray(self.sociality, dtype=np.float64)
            if self.sociality.shape[0] != self.Z.shape[0]:
                raise ValueError("sociality length must equal node count")

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def d(self) -> int:
        return self.Z.shape[1]

    def copy(self) -> "LatentState":
        return LatentState(
            self.Z.copy(),
            None if self.allocations is None else self.allocations.copy(),
            None if self.sociality is None else self.sociality.copy(),
        )


# ---------------------------------------------------------------------------
# Log-odds kernels


def edge_probability(eta):
    """Tie probability logistic(eta), kept strictly inside (0, 1)."""
    eta = np.asarray(eta, dtype=np.float64)
    if not np.isfinite(eta).all():
        raise ValueError("eta must be finite")
    p = expit(eta)
    p = np.clip(p, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    return float(p) if p.ndim == 0 else p


def _covariate_term(i, j, params, x):
    if x is None:
        if params.beta.size:
            raise ValueError("params carry covariate coefficients but no covariates given")
        return 0.0
    if params.beta.size != x.p:
        raise ValueError(f"beta has length {params.beta.size}, covariates have p={x.p}")
    return float(x.values[i, j] @ params.beta)


def _sociality_term(i, j, state):
    if state.sociality is None:
        return 0.0
    s = state.sociality
    if s.ndim == 1:
        return float(s[i] + s[j])
    return float(s[i, 0] + s[j, 1])


def eta_distance(i, j, state, params, x=None):
    """Distance-family log-odds for the ordered dyad (i, j)."""
    if i == j:
        raise ValueError("eta is undefined on the diagonal")
    diff = state.Z[i] - state.Z[j]
    return (
        params.alpha
        + _covariate_term(i, j, params, x)
        - params.beta1 * float(np.linalg.norm(diff))
        + _sociality_term(i, j, state)
    )


def eta_projection(i, j, state, params, x=None):
    """Projection log-odds: the signed length of z_i projected on z_j."""
    if i == j:
        raise ValueError("eta is undefined on the diagonal")
    nj = float(np.linalg.norm(state.Z[j]))
    if nj == 0.0:
        raise ValueError(f"projection direction undefined: node {j} at the origin")
    return (
        params.alpha
        + _covariate_term(i, j, params, x)
        + float(state.Z[i] @ state.Z[j]) / nj
    )


def dyad_mask(n, directed):
    """Boolean (n, n) mask selecting each dyad exactly once."""
    if directed:
        return ~np.eye(n, dtype=bool)
    return np.triu(np.ones((n, n), dtype=bool), k=1)


def eta_matrix(state, params, spec, x=None):
    """Full (n, n) log-odds matrix; diagonal entries are zero and unused."""
    Z = state.Z
    n = Z.shape[0]
    base = np.full((n, n), params.alpha, dtype=np.float64)
    if x is not None:
        if params.beta.size != x.p:
            raise ValueError(f"beta has length {params.beta.size}, covariates have p={x.p}")
        base += np.tensordot(x.values, params.beta, axes=([2], [0]))
    elif params.beta.size:
        raise ValueError("params carry covariate coefficients but no covariates given")

    if spec.variant == "projection":
        norms = np.linalg.norm(Z, axis=1)
        if np.any(norms == 0.0):
            raise ValueError("projection direction undefined: a position is at the origin")
        eta = base + (Z @ Z.T) / norms[None, :]
    else:
        eta = base - params.beta1 * cdist(Z, Z)
        if state.sociality is not None:
            s = state.sociality
            if s.ndim == 1:
                eta = eta + s[:, None] + s[None, :]
            else:
                eta = eta + s[:, 0][:, None] + s[:, 1][None, :]
    np.fill_diagonal(eta, 0.0)
    return eta


def edge_probability_matrix(state, params, spec, x=None):
    """Dyad-wise tie probabilities; the diagonal is zeroed."""
    p = expit(eta_matrix(state, params, spec, x))
    np.fill_diagonal(p, 0.0)
    return p


# ---------------------------------------------------------------------------
# Likelihood and priors


def log_likelihood(g: Network, state, params, spec, x=None):
    """Bernoulli log-likelihood summed over dyads.

    Each dyad contributes y * eta - log(1 + exp(eta)), evaluated with the
    stable split form of log1p(exp(.)).
    """
    if state.n != g.n:
        raise ValueError(f"state has {state.n} nodes, network has {g.n}")
    eta = eta_matrix(state, params, spec, x)
    mask = dyad_mask(g.n, g.directed)
    e = eta[mask]
    y = g.adjacency[mask].astype(np.float64)
    return float(np.sum(y * e - np.logaddexp(0.0, e)))


def _mixture_log_density(Z, mixture):
    """Per-node log of sum_g lam_g N(z; mu_g, sigma2_g I), shape (n,)."""
    d = Z.shape[1]
    sq = cdist(Z, mixture.mu, metric="sqeuclidean")
    logcomp = (
        np.log(mixture.lam)[None, :]
        - 0.5 * d * (_LOG_2PI + np.log(mixture.sigma2))[None, :]
        - 0.5 * sq / mixture.sigma2[None, :]
    )
    return logsumexp(logcomp, axis=1)


def _log_invgamma(x, shape, scale):
    return shape * np.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x


def log_prior_positions(state, params, prior, spec):
    """Log density of the latent positions under their prior."""
    Z = state.Z
    n, d = Z.shape
    if spec.mixture_active:
        if params.mixture is None:
            raise ValueError("mixture variant requires mixture parameters")
        return float(np.sum(_mixture_log_density(Z, params.mixture)))
    v = prior.position_variance
    return float(-0.5 * n * d * (_LOG_2PI + np.log(v)) - 0.5 * np.sum(Z * Z) / v)


def _log_normal_scalar(val, var):
    return -0.5 * (_LOG_2PI + np.log(var)) - 0.5 * val * val / var


def log_prior(state, params, prior, spec):
    """Joint log prior of positions, global scalars, node effects, and
    mixture hyperparameters (when a mixture is active)."""
    total = log_prior_positions(state, params, prior, spec)
    v = prior.global_variance
    total += _log_normal_scalar(params.alpha, v)
    total += float(np.sum(-0.5 * (_LOG_2PI + np.log(v)) - 0.5 * params.beta**2 / v))
    if spec.beta1_free:
        if params.beta1 <= 0:
            raise ValueError("free distance coefficient must be positive")
        w = np.log(params.beta1)
        total += _log_normal_scalar(w, v) - w  # log-normal density of beta1
    if spec.sociality_active:
        if state.sociality is None:
            raise ValueError("lpcmre requires sociality effects")
        s2 = params.sociality_variance
        soc = state.sociality
        total += float(
            np.sum(-0.5 * (_LOG_2PI + np.log(s2)) - 0.5 * soc**2 / s2)
        )
        total += float(_log_invgamma(s2, prior.sociality_shape, prior.sociality_scale))
    if spec.mixture_active:
        m = params.mixture
        nu = prior.dirichlet_concentration
        G = m.G
        total += float(gammaln(G * nu) - G * gammaln(nu) + (nu - 1.0) * np.sum(np.log(m.lam)))
        w2 = prior.cluster_mean_variance
        total += float(
            np.sum(-0.5 * m.mu.shape[1] * (_LOG_2PI + np.log(w2)) - 0.5 * np.sum(m.mu**2, axis=1) / w2)
        )
        total += float(
            np.sum(_log_invgamma(m.sigma2, prior.cluster_variance_shape, prior.cluster_variance_scale))
        )
    return total


def log_posterior(g, state, params, prior, spec, x=None):
    """Unnormalized log posterior: log-likelihood plus log prior."""
    return log_likelihood(g, state, params, spec, x) + log_prior(state, params, prior, spec)


# ---------------------------------------------------------------------------
# Gradients (used by the two-step initializer and verified by tests)


@dataclass
class Gradient:
    """Gradient of an objective with respect to the model parameters."""

    Z: np.ndarray
    alpha: float
    beta: np.ndarray
    beta1: float | None = None
    sociality: np.ndarray | None = None


def _residual_matrix(g, eta):
    """(y - p) per dyad; zero on the diagonal and on unused entries."""
    r = g.adjacency.astype(np.float64) - expit(eta)
    mask = dyad_mask(g.n, g.directed)
    r = np.where(mask, r, 0.0)
    return r


def log_likelihood_gradient(g, state, params, spec, x=None):
    """Analytic gradient of :func:`log_likelihood`."""
    Z = state.Z
    n, d = Z.shape
    eta = eta_matrix(state, params, spec, x)
    R = _residual_matrix(g, eta)  # one entry per dyad
    dalpha = float(R.sum())
    if x is not None:
        dbeta = np.tensordot(R, x.values, axes=([0, 1], [0, 1]))
    else:
        dbeta = np.zeros(0)

    if spec.variant == "projection":
        norms = np.linalg.norm(Z, axis=1)
        dZ = (R / norms[None, :]) @ Z  # d eta_ij / d z_i = z_j / |z_j|
        colsum = (R.T / norms[:, None]) @ Z  # z_i / |z_j| part of d/d z_j
        dots = Z @ Z.T
        coef = np.sum(R * dots, axis=0) / norms**3
        dZ += colsum - coef[:, None] * Z
        return Gradient(Z=dZ, alpha=dalpha, beta=dbeta)

    D = cdist(Z, Z)
    dbeta1 = float(-np.sum(R * D)) if spec.beta1_free else None
    # Coincident positions make (z_i - z_j)/d_ij a 0/0; the difference
    # vector is zero there, so any finite denominator yields the correct
    # zero contribution (diagonal included).
    Dsafe = np.where(D > 0.0, D, 1.0)
    Rs = R + R.T  # both endpoints of every dyad
    W = Rs / Dsafe
    dZ = -params.beta1 * (W.sum(axis=1)[:, None] * Z - W @ Z)
    dsoc = None
    if state.sociality is not None:
        if state.sociality.ndim == 1:
            dsoc = Rs.sum(axis=1)
        else:
            dsoc = np.stack([R.sum(axis=1), R.sum(axis=0)], axis=1)
    return Gradient(Z=dZ, alpha=dalpha, beta=dbeta, beta1=dbeta1, sociality=dsoc)


def _position_prior_gradient(state, params, prior, spec):
    Z = state.Z
    if not spec.mixture_active:
        return -Z / prior.position_variance
    m = params.mixture
    d = Z.shape[1]
    sq = cdist(Z, m.mu, metric="sqeuclidean")
    logcomp = (
        np.log(m.lam)[None, :]
        - 0.5 * d * (_LOG_2PI + np.log(m.sigma2))[None, :]
        - 0.5 * sq / m.sigma2[None, :]
    )
    resp = np.exp(logcomp - logsumexp(logcomp, axis=1)[:, None])
    winv = resp / m.sigma2[None, :]
    return -(winv.sum(axis=1)[:, None] * Z - winv @ m.mu)


def log_posterior_gradient(g, state, params, prior, spec, x=None):
    """Analytic gradient of :func:`log_posterior` in (Z, alpha, beta,
    beta1, sociality); mixture and variance hyperparameters are held
    fixed."""
    grad = log_likelihood_gradient(g, state, params, spec, x)
    v = prior.global_variance
    dZ = grad.Z + _position_prior_gradient(state, params, prior, spec)
    dalpha = grad.alpha - params.alpha / v
    dbeta = grad.beta - params.beta / v
    dbeta1 = grad.beta1
    if dbeta1 is not None:
        b1 = params.beta1
        dbeta1 = dbeta1 - np.log(b1) / (v * b1) - 1.0 / b1
    dsoc = grad.sociality
    if dsoc is not None:
        dsoc = dsoc - state.sociality / params.sociality_variance
    return Gradient(Z=dZ, alpha=dalpha, beta=dbeta, beta1=dbeta1, sociality=dsoc)
