"""CSV emission for posterior draws, summaries, and scan reports.

Floats are written with ``repr`` (shortest round-trip form) so that a
rerun with the same seed produces byte-identical files. Every file opens
with a comment line embedding the seed and the configuration hash.
"""

from __future__ import annotations

import csv
import io

import numpy as np

from .errors import DataError

__all__ = [
    "write_posterior_csv",
    "write_summary_csv",
    "read_summary_csv",
    "write_coallocation_csv",
    "write_scan_csv",
    "write_truth_csv",
]


def _fmt(v) -> str:
    return repr(float(v))


def _header(seed, config_hash) -> str:
    return f"# seed={seed} config_sha256={config_hash}\n"


def write_posterior_csv(sample, path, seed=0, config_hash=""):
    """Long-format draws: one row per (iteration, kind, index, dim)."""
    buf = io.StringIO()
    buf.write(_header(seed, config_hash))
    buf.write("iteration,kind,index,dim,value\n")
    spec = sample.spec
    n, d = sample.n, sample.d
    for k in range(len(sample)):
        it = int(sample.sweep_indices[k])
        Z = sample.positions[k]
        for i in range(n):
            for j in range(d):
                buf.write(f"{it},position,{i},{j},{_fmt(Z[i, j])}\n")
        buf.write(f"{it},alpha,0,0,{_fmt(sample.alpha[k])}\n")
        for kk in range(sample.beta.shape[1]):
            buf.write(f"{it},beta,{kk},0,{_fmt(sample.beta[k, kk])}\n")
        if spec.beta1_free:
            buf.write(f"{it},beta1,0,0,{_fmt(sample.beta1[k])}\n")
        if sample.sociality is not None:
            soc = sample.sociality[k]
            if soc.ndim == 1:
                for i in range(n):
                    buf.write(f"{it},sociality,{i},0,{_fmt(soc[i])}\n")
            else:
                for i in range(n):
                    for j in range(2):
                        buf.write(f"{it},sociality,{i},{j},{_fmt(soc[i, j])}\n")
            buf.write(f"{it},sociality_variance,0,0,{_fmt(sample.sociality_variance[k])}\n")
        if sample.lam is not None:
            G = sample.lam.shape[1]
            for gcomp in range(G):
                buf.write(f"{it},lambda,{gcomp},0,{_fmt(sample.lam[k, gcomp])}\n")
            for gcomp in range(G):
                for j in range(d):
                    buf.write(f"{it},mu,{gcomp},{j},{_fmt(sample.mu[k, gcomp, j])}\n")
            for gcomp in range(G):
                buf.write(f"{it},sigma2,{gcomp},0,{_fmt(sample.sigma2[k, gcomp])}\n")
            for i in range(n):
                buf.write(f"{it},allocation,{i},0,{int(sample.allocations[k, i])}\n")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_summary_csv(path, means, sds, degrees, sociality=None, clusters=None,
                      seed=0, config_hash=""):
    """Aligned per-node summary: (node, dim, mean, sd) rows, with the
    node-level degree, sociality, and cluster columns repeated per dim."""
    means = np.asarray(means)
    sds = np.asarray(sds)
    n, d = means.shape
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(seed, config_hash))
        fh.write("node,dim,mean,sd,degree,sociality,cluster\n")
        for i in range(n):
            soc = "" if sociality is None else _fmt(sociality[i])
            clu = "" if clusters is None else str(int(clusters[i]))
            for j in range(d):
                fh.write(
                    f"{i},{j},{_fmt(means[i, j])},{_fmt(sds[i, j])},"
                    f"{int(degrees[i])},{soc},{clu}\n"
                )


def read_summary_csv(path):
    """Read a summary file back into per-node arrays.

    Returns a dict with keys: means (n, d), sds (n, d), degrees (n,),
    sociality ((n,) or None), clusters ((n,) int or None).
    """
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            rows.append(line.rstrip("\n"))
    if not rows:
        raise DataError(f"summary file {path} is empty")
    reader = csv.DictReader(rows)
    required = {"node", "dim", "mean", "sd", "degree", "sociality", "cluster"}
    if reader.fieldnames is None or not required.issubset(set(reader.fieldnames)):
        missing = required - set(reader.fieldnames or ())
        raise DataError(f"summary file missing columns: {sorted(missing)}")
    records = list(reader)
    if not records:
        raise DataError(f"summary file {path} has no data rows")
    n = max(int(r["node"]) for r in records) + 1
    d = max(int(r["dim"]) for r in records) + 1
    means = np.zeros((n, d))
    sds = np.zeros((n, d))
    degrees = np.zeros(n)
    sociality = np.full(n, np.nan)
    clusters = np.full(n, -1, dtype=np.int64)
    have_soc = False
    have_clu = False
    for r in records:
        i, j = int(r["node"]), int(r["dim"])
        means[i, j] = float(r["mean"])
        sds[i, j] = float(r["sd"])
        degrees[i] = float(r["degree"])
        if r["sociality"]:
            sociality[i] = float(r["sociality"])
            have_soc = True
        if r["cluster"]:
            clusters[i] = int(r["cluster"])
            have_clu = True
    return {
        "means": means,
        "sds": sds,
        "degrees": degrees,
        "sociality": sociality if have_soc else None,
        "clusters": clusters if have_clu else None,
    }


def write_coallocation_csv(path, co, seed=0, config_hash=""):
    """Dense co-allocation frequency matrix, one row per node."""
    co = np.asarray(co)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(seed, config_hash))
        for i in range(co.shape[0]):
            fh.write(",".join(_fmt(v) for v in co[i]) + "\n")


def write_scan_csv(path, scores, seed=0, config_hash=""):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(seed, config_hash))
        fh.write("G,d,bic_likelihood,bic_mixture,bic_total,dic,seed\n")
        for s in scores:
            fh.write(
                f"{s.G},{s.d},{_fmt(s.bic_likelihood)},{_fmt(s.bic_mixture)},"
                f"{_fmt(s.bic_total)},{_fmt(s.dic)},{s.seed}\n"
            )


def write_truth_csv(path, state, params, seed=0, config_hash=""):
    """Ground-truth parameters of a simulated network, long format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_header(seed, config_hash))
        fh.write("kind,index,dim,value\n")
        Z = state.Z
        for i in range(Z.shape[0]):
            for j in range(Z.shape[1]):
                fh.write(f"position,{i},{j},{_fmt(Z[i, j])}\n")
        fh.write(f"alpha,0,0,{_fmt(params.alpha)}\n")
        for k in range(params.beta.size):
            fh.write(f"beta,{k},0,{_fmt(params.beta[k])}\n")
        fh.write(f"beta1,0,0,{_fmt(params.beta1)}\n")
        if state.sociality is not None:
            soc = np.atleast_2d(state.sociality.T).T
            for i in range(soc.shape[0]):
                for j in range(soc.shape[1]):
                    fh.write(f"sociality,{i},{j},{_fmt(soc[i, j])}\n")
        if state.allocations is not None:
            for i, a in enumerate(state.allocations):
                fh.write(f"allocation,{i},0,{int(a)}\n")
        if params.mixture is not None:
            m = params.mixture
            for gcomp in range(m.G):
                fh.write(f"lambda,{gcomp},0,{_fmt(m.lam[gcomp])}\n")
            for gcomp in range(m.G):
                for j in range(m.mu.shape[1]):
                    fh.write(f"mu,{gcomp},{j},{_fmt(m.mu[gcomp, j])}\n")
            for gcomp in range(m.G):
                fh.write(f"sigma2,{gcomp},0,{_fmt(m.sigma2[gcomp])}\n")
