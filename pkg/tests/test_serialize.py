import numpy as np
import pytest

from latentnets import (
    DataError,
    ModelSpec,
    Network,
    PriorSpec,
    SamplerConfig,
    mcmc_fit,
)
from latentnets.selection import ModelScore
from latentnets.serialize import (
    read_summary_csv,
    write_coallocation_csv,
    write_posterior_csv,
    write_scan_csv,
    write_summary_csv,
)


def _sample(variant="distance", clusters=0, seed=2):
    rng = np.random.default_rng(seed)
    up = np.triu(rng.random((7, 7)) < 0.45, k=1)
    g = Network((up | up.T).astype(int))
    spec = ModelSpec(variant, clusters=clusters)
    return mcmc_fit(g, spec, PriorSpec(), SamplerConfig(iterations=30, burn_in=10, seed=seed))


def test_posterior_csv_layout(tmp_path):
    sample = _sample()
    path = tmp_path / "post.csv"
    write_posterior_csv(sample, path, seed=7, config_hash="abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# seed=7 config_sha256=abc"
    assert lines[1] == "iteration,kind,index,dim,value"
    # per draw: 7 nodes x 2 dims positions + alpha
    expected = 2 + len(sample) * (7 * 2 + 1)
    assert len(lines) == expected
    kinds = {ln.split(",")[1] for ln in lines[2:]}
    assert kinds == {"position", "alpha"}


def test_posterior_csv_mixture_kinds(tmp_path):
    sample = _sample(variant="lpcm", clusters=2)
    path = tmp_path / "post.csv"
    write_posterior_csv(sample, path, seed=1, config_hash="h")
    kinds = {ln.split(",")[1] for ln in path.read_text().splitlines()[2:]}
    assert kinds == {"position", "alpha", "beta1", "lambda", "mu", "sigma2", "allocation"}


def test_posterior_csv_values_round_trip_exactly(tmp_path):
    sample = _sample()
    path = tmp_path / "post.csv"
    write_posterior_csv(sample, path)
    rows = [ln.split(",") for ln in path.read_text().splitlines()[2:]]
    pos = [r for r in rows if r[1] == "position"]
    k = 0
    for it in range(len(sample)):
        for i in range(7):
            for j in range(2):
                assert float(pos[k][4]) == sample.positions[it, i, j]
                k += 1


def test_summary_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    means = rng.standard_normal((5, 2))
    sds = np.abs(rng.standard_normal((5, 2)))
    degrees = np.arange(5)
    soc = rng.standard_normal(5)
    clusters = np.array([0, 0, 1, 1, 2])
    path = tmp_path / "summary.csv"
    write_summary_csv(path, means, sds, degrees, sociality=soc, clusters=clusters,
                      seed=5, config_hash="x")
    back = read_summary_csv(path)
    assert np.array_equal(back["means"], means)
    assert np.array_equal(back["sds"], sds)
    assert np.array_equal(back["degrees"], degrees.astype(float))
    assert np.array_equal(back["sociality"], soc)
    assert np.array_equal(back["clusters"], clusters)


def test_summary_missing_columns_rejected(tmp_path):
    path = tmp_path / "summary.csv"
    path.write_text("node,dim,mean\n0,0,1.0\n")
    with pytest.raises(DataError, match="missing columns"):
        read_summary_csv(path)


def test_coallocation_csv(tmp_path):
    co = np.array([[1.0, 0.5], [0.5, 1.0]])
    path = tmp_path / "co.csv"
    write_coallocation_csv(path, co, seed=1, config_hash="h")
    lines = path.read_text().splitlines()
    assert len(lines) == 3
    assert [float(v) for v in lines[1].split(",")] == [1.0, 0.5]


def test_scan_csv(tmp_path):
    scores = [
        ModelScore(G=2, d=2, bic_likelihood=10.0, bic_mixture=5.0, bic_total=15.0, dic=12.0, seed=3),
        ModelScore(G=3, d=2, bic_likelihood=11.0, bic_mixture=9.0, bic_total=20.0, dic=13.0, seed=4),
    ]
    path = tmp_path / "scan.csv"
    write_scan_csv(path, scores, seed=0, config_hash="h")
    lines = path.read_text().splitlines()
    assert lines[1] == "G,d,bic_likelihood,bic_mixture,bic_total,dic,seed"
    assert lines[2].startswith("2,2,10.0,5.0,15.0,12.0,3")
