"""Case-control likelihood subsampling on a sparse network.

Sparse networks carry most of their information in the edges that exist;
non-edges can be subsampled and reweighted without biasing the
log-likelihood estimate. This demo measures estimator error and speed
against the exact computation. Runs in about half a minute.
"""

import time

import numpy as np

import latentnets as ln
from latentnets.inference import case_control_loglik

# A sparse 300-node network.
spec = ln.ModelSpec("distance")
prior = ln.PriorSpec(position_variance=4.0)
g, state, params = ln.simulate_network(
    spec, 300, params=ln.GlobalParams(alpha=-1.0), prior=prior, seed=5
)
print(g, f"density {g.edge_count / g.dyad_count:.3f}")

t0 = time.time()
exact = ln.log_likelihood(g, state, params, spec)
t_exact = time.time() - t0
print(f"exact log-likelihood {exact:.1f} ({1e3 * t_exact:.1f} ms)")

print(f"\n{'m0':>4} {'mean estimate':>14} {'sd':>8} {'bias z':>7}")
for m0 in (2, 5, 10, 20):
    rng = np.random.default_rng(11)
    vals = np.array([
        case_control_loglik(g, state, params, spec, m0=m0, rng=rng)
        for _ in range(200)
    ])
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    print(f"{m0:>4} {vals.mean():>14.1f} {vals.std(ddof=1):>8.1f} "
          f"{(vals.mean() - exact) / se:>7.2f}")

print("\nestimates are unbiased at every m0; the spread shrinks as the")
print("per-node control sample grows, trading accuracy against work.")

# Inside the sampler the same subsampling drives the accept/reject
# steps. Per-node bookkeeping has a fixed cost, so the win appears once
# networks are large and sparse enough for dense rows to dominate.
print("\nsampler cost per sweep, exact vs case-control m0=5:")
for n_big, alpha in ((300, -1.0), (800, -2.0)):
    gb, _, _ = ln.simulate_network(
        spec, n_big, params=ln.GlobalParams(alpha=alpha),
        prior=ln.PriorSpec(position_variance=6.0), seed=5,
    )
    init = ln.LatentState(0.5 * np.random.default_rng(0).standard_normal((n_big, 2)))
    times = []
    for cc in (None, 5):
        cfg = ln.SamplerConfig(iterations=30, burn_in=10, seed=1, case_control=cc)
        t0 = time.time()
        ln.mcmc_fit(gb, spec, prior, cfg,
                    init_state=init, init_params=ln.GlobalParams(alpha=alpha))
        times.append((time.time() - t0) / 30 * 1000)
    print(f"  n={n_big}: exact {times[0]:.0f} ms, case-control {times[1]:.0f} ms")
