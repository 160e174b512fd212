"""Command-line front end: simulate, fit, select, and layout.

Every command reads a flat ``key = value`` config file (unknown keys are
rejected), honors ``--seed`` as an override, and embeds the effective
seed plus the sha256 of the config file in every output. Exit codes:
0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, NumericalError
from .inference import SamplerConfig, mcmc_fit
from .layout import render_layout_svg
from .models import GlobalParams, ModelSpec, PriorSpec
from .network import degree, load_edge_list, write_edge_list, write_node_mapping
from .postprocess import (
    align_sample,
    cluster_summary,
    posterior_mean_positions,
    posterior_sd_positions,
)
from .selection import bic_score, scan, simulate_network
from .serialize import (
    read_summary_csv,
    write_coallocation_csv,
    write_posterior_csv,
    write_scan_csv,
    write_summary_csv,
    write_truth_csv,
)

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}

_SHARED_KEYS = {
    "model": str,
    "dimensions": int,
    "clusters": int,
    "directed": bool,
    "beta1_free": bool,
    "position_variance": float,
    "global_variance": float,
    "dirichlet_concentration": float,
    "cluster_mean_variance": float,
    "cluster_variance_shape": float,
    "cluster_variance_scale": float,
    "sociality_shape": float,
    "sociality_scale": float,
    "seed": int,
    "output_dir": str,
}
_SAMPLER_KEYS = {
    "iterations": int,
    "burn_in": int,
    "thinning": int,
    "proposal_sd_positions": float,
    "proposal_sd_globals": float,
    "adapt": bool,
    "case_control_m0": int,
    "prior_only": bool,
}
_ALLOWED = {
    "fit": {**_SHARED_KEYS, **_SAMPLER_KEYS, "edge_list": str},
    "simulate": {**_SHARED_KEYS, "nodes": int, "alpha": float, "beta1": float},
    "select": {
        **_SHARED_KEYS,
        **_SAMPLER_KEYS,
        "edge_list": str,
        "clusters_min": int,
        "clusters_max": int,
        "dimensions_min": int,
        "dimensions_max": int,
    },
    "layout": {"summary": str, "output_dir": str, "seed": int},
}
_REQUIRED = {
    "fit": ("model", "edge_list", "output_dir"),
    "simulate": ("model", "nodes", "output_dir"),
    "select": ("model", "edge_list", "output_dir", "clusters_min", "clusters_max"),
    "layout": ("summary", "output_dir"),
}


def load_config(path, command):
    """Parse a flat key=value config file with fail-fast validation."""
    allowed = _ALLOWED[command]
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values = {}
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in allowed:
            raise ConfigError(f"line {lineno}: unknown key {key!r} for command {command!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        typ = allowed[key]
        try:
            if typ is bool:
                values[key] = _BOOL[val.lower()]
            else:
                values[key] = typ(val)
        except (KeyError, ValueError) as exc:
            raise ConfigError(
                f"line {lineno}: value {val!r} for {key!r} is not a valid {typ.__name__}"
            ) from exc
    for key in _REQUIRED[command]:
        if key not in values:
            raise ConfigError(f"missing required key {key!r} for command {command!r}")
    values["_hash"] = hashlib.sha256(raw).hexdigest()
    return values


def _check_distinct_paths(paths):
    seen = {}
    for name, p in paths:
        resolved = str(Path(p))
        if resolved in seen:
            raise ConfigError(f"paths {seen[resolved]!r} and {name!r} both refer to {p!r}")
        seen[resolved] = name


def _build_spec(cfg):
    try:
        return ModelSpec(
            variant=cfg["model"],
            dimensions=cfg.get("dimensions", 2),
            clusters=cfg.get("clusters", 0),
            covariates=0,
            beta1_free=cfg.get("beta1_free"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_prior(cfg):
    kwargs = {
        k: cfg[k]
        for k in (
            "position_variance",
            "global_variance",
            "dirichlet_concentration",
            "cluster_mean_variance",
            "cluster_variance_shape",
            "cluster_variance_scale",
            "sociality_shape",
            "sociality_scale",
        )
        if k in cfg
    }
    try:
        return PriorSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _build_sampler(cfg):
    kwargs = {
        "iterations": cfg.get("iterations", 2000),
        "burn_in": cfg.get("burn_in", 500),
        "thinning": cfg.get("thinning", 1),
        "proposal_sd_positions": cfg.get("proposal_sd_positions", 0.5),
        "proposal_sd_globals": cfg.get("proposal_sd_globals", 0.2),
        "adapt": cfg.get("adapt", True),
        "seed": cfg.get("seed", 0),
        "case_control": cfg.get("case_control_m0"),
        "prior_only": cfg.get("prior_only", False),
    }
    try:
        return SamplerConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _load_network(cfg):
    path = cfg["edge_list"]
    if not Path(path).exists():
        raise DataError(f"edge list {path} does not exist")
    return load_edge_list(path, directed=cfg.get("directed", False))


def _outdir(cfg):
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_fit(cfg):
    spec = _build_spec(cfg)
    prior = _build_prior(cfg)
    sampler_cfg = _build_sampler(cfg)
    out = _outdir(cfg)
    _check_distinct_paths([("edge_list", cfg["edge_list"]), ("output_dir", cfg["output_dir"])])
    g = _load_network(cfg)
    seed, chash = sampler_cfg.seed, cfg["_hash"]

    try:
        sample = mcmc_fit(g, spec, prior, sampler_cfg)
        if sampler_cfg.prior_only:
            # prior draws are exchangeable; aligning them would distort
            # the marginals the run is meant to expose
            aligned = sample
            score = None
        else:
            reference = sample.state_at(sample.map_index())
            aligned = align_sample(sample, reference)
            score = bic_score(g, aligned, spec)
        mean_state = posterior_mean_positions(aligned)
        sd = posterior_sd_positions(aligned)
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalError(str(exc)) from exc

    degrees = np.array([
        sum(degree(g, i)) if g.directed else degree(g, i) for i in range(g.n)
    ])
    sociality = None
    if aligned.sociality is not None:
        soc_mean = aligned.sociality.mean(axis=0)
        sociality = soc_mean.sum(axis=1) if soc_mean.ndim == 2 else soc_mean
    clusters = None
    co = None
    if aligned.allocations is not None:
        co, clusters = cluster_summary(aligned)

    write_posterior_csv(aligned, out / "posterior.csv", seed=seed, config_hash=chash)
    write_summary_csv(
        out / "summary.csv", mean_state.Z, sd, degrees,
        sociality=sociality, clusters=clusters, seed=seed, config_hash=chash,
    )
    write_node_mapping(g, out / "node_mapping.csv", comment=f"seed={seed} config_sha256={chash}")
    if co is not None:
        write_coallocation_csv(out / "coallocation.csv", co, seed=seed, config_hash=chash)

    lines = [
        f"seed={seed}",
        f"config_sha256={chash}",
        f"package_version={__version__}",
        f"variant={spec.variant} dimensions={spec.dimensions} clusters={spec.clusters}",
        f"nodes={g.n} edges={g.edge_count} directed={g.directed}",
        f"iterations={sampler_cfg.iterations} burn_in={sampler_cfg.burn_in} "
        f"thinning={sampler_cfg.thinning} draws={len(sample)}",
        "positions=raw_prior_draws" if sampler_cfg.prior_only
        else "positions=procrustes_aligned_to_map_draw",
    ]
    for key, rate in sorted(sample.acceptance.items()):
        lines.append(f"acceptance_{key}={rate:.6f}")
    lines.append(f"map_log_posterior={sample.log_posterior[sample.map_index()]!r}")
    lines.append(f"map_log_likelihood={sample.log_likelihood[sample.map_index()]!r}")
    if score is not None:
        lines.append(f"bic_likelihood={score.bic_likelihood!r}")
        lines.append(f"bic_mixture={score.bic_mixture!r}")
        lines.append(f"bic_total={score.bic_total!r}")
        lines.append(f"dic={score.dic!r}")
    (out / "diagnostics.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return 0


def cmd_simulate(cfg):
    spec = _build_spec(cfg)
    prior = _build_prior(cfg)
    out = _outdir(cfg)
    seed = cfg.get("seed", 0)
    n = cfg["nodes"]
    if n < 2:
        raise ConfigError("nodes must be >= 2")
    params = GlobalParams(alpha=cfg.get("alpha", 0.0), beta1=cfg.get("beta1", 1.0))
    try:
        g, state, params = simulate_network(
            spec, n, params=params, prior=prior, seed=seed,
            directed=cfg.get("directed", False),
        )
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalError(str(exc)) from exc
    chash = cfg["_hash"]
    write_edge_list(g, out / "edges.csv", comment=f"seed={seed} config_sha256={chash}")
    write_truth_csv(out / "truth.csv", state, params, seed=seed, config_hash=chash)
    return 0


def cmd_select(cfg, threads=1):
    spec = _build_spec(cfg)
    prior = _build_prior(cfg)
    sampler_cfg = _build_sampler(cfg)
    out = _outdir(cfg)
    _check_distinct_paths([("edge_list", cfg["edge_list"]), ("output_dir", cfg["output_dir"])])
    g = _load_network(cfg)
    g_lo, g_hi = cfg["clusters_min"], cfg["clusters_max"]
    d_lo = cfg.get("dimensions_min", spec.dimensions)
    d_hi = cfg.get("dimensions_max", spec.dimensions)
    if g_lo < 1 or g_lo > g_hi or d_lo < 1 or d_lo > d_hi:
        raise ConfigError("cluster and dimension ranges must be nonempty and increasing")
    try:
        scores = scan(
            g, range(g_lo, g_hi + 1), range(d_lo, d_hi + 1), prior, sampler_cfg,
            variant=spec.variant, beta1_free=spec.beta1_free, threads=threads,
        )
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericalError(str(exc)) from exc
    if not scores:
        raise NumericalError("every scan cell failed")
    write_scan_csv(out / "scan.csv", scores, seed=sampler_cfg.seed, config_hash=cfg["_hash"])
    return 0


def cmd_layout(cfg):
    out = _outdir(cfg)
    path = cfg["summary"]
    _check_distinct_paths([("summary", path), ("output_dir", cfg["output_dir"])])
    if not Path(path).exists():
        raise DataError(f"summary file {path} does not exist")
    summary = read_summary_csv(path)
    svg = render_layout_svg(
        summary["means"], summary["degrees"],
        sociality=summary["sociality"], clusters=summary["clusters"],
        seed=cfg.get("seed", 0), config_hash=cfg["_hash"],
    )
    (out / "layout.svg").write_text(svg, encoding="utf-8")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="latentnets",
        description="Latent position network models: simulate, fit, select, layout.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("fit", "run the sampler on an edge list and write posterior artifacts"),
        ("simulate", "draw a network from the generative model"),
        ("select", "scan cluster counts / dimensions and rank by BIC"),
        ("layout", "render a fitted summary as an SVG scatter"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to a key=value config file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="parallel scan cells (select only)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.command == "fit":
            return cmd_fit(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "select":
            return cmd_select(cfg, threads=args.threads)
        return cmd_layout(cfg)
    except ConfigError as exc:
        print(f"ERROR config: {exc}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, OSError) as exc:
        print(f"ERROR data: {exc}", file=sys.stderr)
        return 3
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"ERROR numerical: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
