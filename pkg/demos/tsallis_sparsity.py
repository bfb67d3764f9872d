"""
Sparse visitations from the Tsallis regularizer
===============================================

The KL conjugate puts positive mass on every state-action pair.  The Tsallis
conjugate water-fills: pairs whose advantage falls below a threshold get
exactly zero weight.  Larger ``eta`` gives sparser optimal visitations.
"""

# %%
# Count zero entries at the optimum
# ---------------------------------

import numpy as np

from reps import KlSpec, RegularizedProblem, TsallisSpec, random_mdp, uniform_reference
from reps.agd import reference_solve
from reps.dual import candidate_primal, flow_residual

m = random_mdp(3, 5, 3, 3, 0.9)
q = uniform_reference(m)

p = RegularizedProblem(m, KlSpec(8.0, q))
lam = candidate_primal(p, reference_solve(p).v)
print(f"KL      eta=8:   zero pairs {int(np.sum(lam == 0)):2d} / 15, min weight {lam.min():.2e}")

for alpha in [1.25, 1.5, 2.0]:
    for eta in [2.0, 8.0, 32.0]:
        p = RegularizedProblem(m, TsallisSpec(eta, alpha, q))
        lam = candidate_primal(p, reference_solve(p).v)
        res = np.abs(flow_residual(m, lam)).sum()
        print(f"Tsallis alpha={alpha:4.2f} eta={eta:4.0f}: zero pairs {int(np.sum(lam == 0)):2d} / 15, "
              f"flow residual {res:.1e}")
