"""
How regularization strength trades accuracy for smoothness
==========================================================

The entropy term pulls the solution toward the reference distribution.
Larger ``eta`` weakens that pull, so the extracted policy gets closer to
optimal, at the price of a larger smoothness constant and more iterations.
"""

# %%
# Sweep eta on one instance
# -------------------------

import math

from reps import KlSpec, RegularizedProblem, random_mdp, uniform_reference
from reps.agd import AgdConfig, accelerated_solve, eta_for_accuracy
from reps.diagnostics import policy_suboptimality, value_iteration, visitation_floor
from reps.dual import candidate_primal, dual_radius, smoothness_constant
from reps.mdp import policy_from_visitation

m = random_mdp(3, 5, 3, 3, 0.9)
q = uniform_reference(m)
oracle = value_iteration(m, 1e-12)
rho = visitation_floor(m, 100, 0)


def solve(eta):
    p = RegularizedProblem(m, KlSpec(eta, q))
    v, log = accelerated_solve(p, AgdConfig(100_000, dual_radius(p, rho), 1e-10, 100_000))
    policy = policy_from_visitation(candidate_primal(p, v))
    return policy_suboptimality(m, policy, oracle), int(log.rows[-1][0]), smoothness_constant(p)


print(" eta      suboptimality  iterations  smoothness")
for eta in [0.5, 2.0, 8.0, 32.0, 128.0, 512.0]:
    gap, iters, alpha = solve(eta)
    print(f"{eta:6.1f}   {gap:12.2e}  {iters:10d}  {alpha:10.0f}")

# %%
# Choosing eta for a target accuracy
# ----------------------------------
# ``eta_for_accuracy`` implements the rule ``1 / (2 eps log(|S||A|/beta))``.
# It gets smaller as the target tightens, which is the opposite of what the
# sweep above needs.  Sizing eta so that the entropy bias
# ``log(|S||A|/beta) / eta`` is a quarter of the target hits the target.

eps = 0.05
p1 = RegularizedProblem(m, KlSpec(1.0, q))
prescribed = eta_for_accuracy(eps, p1)
bias_sized = 4.0 * math.log(15 / q.beta) / eps
for name, eta in [("eta_for_accuracy", prescribed), ("bias-sized", bias_sized)]:
    gap, iters, _ = solve(eta)
    print(f"{name:17s} eta = {eta:8.2f}  suboptimality = {gap:.2e}  (target {eps})  iterations = {iters}")
