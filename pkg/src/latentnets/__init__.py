"""Latent position models for binary networks.

A library for the latent position model family - the distance and
projection variants, the cluster variant (mixture position prior), and
the cluster variant with sociality random effects - with full Bayesian
MCMC inference, case-control likelihood subsampling, Procrustes
post-processing, BIC/DIC model selection, and generative simulation.
"""

__version__ = "0.1.0"

from .errors import ConfigError, DataError, LatentNetsError, NumericalError
from .inference import (
    PosteriorSample,
    SamplerConfig,
    adapt_proposals,
    case_control_loglik,
    classical_mds,
    mcmc_fit,
    mle_initialize,
    update_globals,
    update_mixture,
    update_positions,
    update_sociality,
)
from .models import (
    GlobalParams,
    Gradient,
    LatentState,
    MixtureParams,
    ModelSpec,
    PriorSpec,
    edge_probability,
    edge_probability_matrix,
    eta_distance,
    eta_matrix,
    eta_projection,
    log_likelihood,
    log_likelihood_gradient,
    log_posterior,
    log_posterior_gradient,
    log_prior,
)
from .network import (
    DyadCovariates,
    Network,
    degree,
    geodesic_distances,
    load_edge_list,
    write_edge_list,
    write_node_mapping,
)
from .postprocess import (
    AlignmentResult,
    align_sample,
    cluster_summary,
    posterior_mean_positions,
    procrustes_align,
)
from .selection import ModelScore, bic_score, dic_score, scan, simulate_network

__all__ = [
    "__version__",
    "LatentNetsError", "ConfigError", "DataError", "NumericalError",
    "Network", "DyadCovariates", "load_edge_list", "write_edge_list",
    "write_node_mapping", "geodesic_distances", "degree",
    "ModelSpec", "PriorSpec", "MixtureParams", "GlobalParams", "LatentState",
    "edge_probability", "eta_distance", "eta_projection", "eta_matrix",
    "edge_probability_matrix", "log_likelihood", "log_prior", "log_posterior",
    "Gradient", "log_likelihood_gradient", "log_posterior_gradient",
    "SamplerConfig", "PosteriorSample", "classical_mds", "mle_initialize",
    "mcmc_fit", "update_positions", "update_sociality", "update_globals",
    "update_mixture", "case_control_loglik", "adapt_proposals",
    "AlignmentResult", "procrustes_align", "align_sample",
    "posterior_mean_positions", "cluster_summary",
    "ModelScore", "bic_score", "dic_score", "simulate_network", "scan",
]
