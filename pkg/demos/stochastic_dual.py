"""
Stochastic descent with a sampled gradient estimator
====================================================

Without the transition matrix, the dual gradient is estimated from sampled
transitions.  A pool of samples gives an empirical model of the advantages;
one fresh transition then turns it into a two-coordinate gradient estimate.
"""

# %%
# Bias of the plug-in estimator
# -----------------------------
# Holding the dual point fixed at the optimum, the estimator's conditional
# mean approaches the true gradient as the pool grows.

import numpy as np

from reps import KlSpec, RegularizedProblem, random_mdp, uniform_reference
from reps.agd import reference_solve
from reps.diagnostics import visitation_floor
from reps.dual import dual_gradient, dual_radius
from reps.rng import seed_sequence
from reps.sgd import SampleStream, SgdConfig, conditional_mean_gradient, empirical_model, sgd_solve

m = random_mdp(0, 3, 2, 2, 0.9)
q = uniform_reference(m)
p = RegularizedProblem(m, KlSpec(4.0 / q.beta, q))
ref = reference_solve(p)
g = dual_gradient(p, ref.v)

for n in [10**3, 10**4, 10**5]:
    bias = []
    for i in range(20):
        pool = SampleStream(m, q, seed_sequence(0, "mc-oracle", i))
        pool.grow_to(n)
        bias.append(np.abs(conditional_mean_gradient(empirical_model(pool, m, ref.v, p.eta), m, q) - g).max())
    print(f"samples {n:7d}: median bias {np.median(bias):.2e}")

# %%
# Step size matters more than sample count
# ----------------------------------------
# With the step ``1 / (16 |S| eta sqrt(t))`` the iterates hardly move in
# 10^4 steps.  A 100x larger step lets the averaged iterate converge.

radius = dual_radius(p, visitation_floor(m, 100, 0))
for tau_mult in [1.0, 100.0]:
    gaps = []
    for seed in range(5):
        _, log = sgd_solve(p, SgdConfig(10_000, 0.1, radius, tau_mult=tau_mult, n_mult=1e-3, record_every=1000), seed)
        gaps.append(log.column("jd_avg") - ref.value)
    t = log.column("t")
    med = np.median(gaps, axis=0)
    slope = np.polyfit(np.log(t), np.log(med), 1)[0]
    print(f"step x{tau_mult:5.0f}: gap {med[0]:.2e} -> {med[-1]:.2e}, log-log slope {slope:.2f}, "
          f"samples used {int(log.column('cum_samples')[-1])}")
