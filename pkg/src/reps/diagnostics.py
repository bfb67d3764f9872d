"""Ground-truth oracles and runnable forms of the structural inequalities.

Oracles: value iteration (polished by exact policy iteration), central
finite differences, Monte-Carlo rollouts and an empirical visitation floor.
Checks return :class:`~reps.report.GapReport` records.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .agd import IterateLog, gradient_bound
from .dual import (
    RegularizedProblem,
    candidate_primal,
    dual_gradient,
    dual_value,
    primal_regularized_value,
    theory_constants,
)
from .errors import InvalidInput
from .mdp import (
    Mdp,
    _check_values,
    policy_from_visitation,
    policy_value,
    state_visitation,
    uniform_policy,
    validate_policy,
    visitation_of_policy,
)
from .report import GapReport
from .rng import as_generator

ENUMERATION_LIMIT = 1024


@dataclass(frozen=True, eq=False)
class OptimalSolution:
    v_star: np.ndarray
    pi_star: np.ndarray
    iterations: int
    residual: float


def bellman_optimality(m: Mdp, v) -> np.ndarray:
    """Action values ``r + gamma P v``."""
    return m.reward + m.discount * (m.transition @ v)


def value_iteration(m: Mdp, tol: float = 1e-10, max_iter: int = 1_000_000) -> OptimalSolution:
    """Unregularized optimum by value iteration followed by exact policy-iteration polishing.

    Value iteration runs until ``||T v - v||_inf <= tol (1 - gamma)``; the greedy
    policy is then improved until stable and evaluated exactly, so ``v_star``
    is the value of ``pi_star`` up to linear-solve rounding.  Greedy ties go to
    the lowest action index.
    """
    if not tol > 0:
        raise InvalidInput(f"tol must be positive, got {tol!r}")
    v = np.zeros(m.n_states)
    target = tol * (1.0 - m.discount)
    it = 0
    for it in range(1, max_iter + 1):
        new = bellman_optimality(m, v).max(axis=1)
        step = np.abs(new - v).max()
        v = new
        if step <= target:
            break
    eye = np.eye(m.n_actions)
    actions = bellman_optimality(m, v).argmax(axis=1)
    for _ in range(100):
        v = policy_value(m, eye[actions])
        q = bellman_optimality(m, v)
        better = q.max(axis=1) > q[np.arange(m.n_states), actions] + 1e-13
        if not better.any():
            break
        actions = np.where(better, q.argmax(axis=1), actions)
    residual = float(np.abs(bellman_optimality(m, v).max(axis=1) - v).max())
    return OptimalSolution(v, eye[actions], it, residual)


def policy_suboptimality(m: Mdp, policy, oracle: OptimalSolution) -> float:
    """``max_s |v^pi_s - v*_s|``."""
    return float(np.abs(policy_value(m, validate_policy(m, policy)) - oracle.v_star).max())


def finite_difference_gradient(p: RegularizedProblem | Callable, v, h: float = 1e-5) -> np.ndarray:
    """Central differences of ``J_D`` (or of any callable) along each coordinate."""
    if not h > 0:
        raise InvalidInput(f"h must be positive, got {h!r}")
    f = p if callable(p) else (lambda x: dual_value(p, x))
    v = np.asarray(v, dtype=float)
    out = np.empty_like(v)
    for i in range(v.size):
        e = np.zeros_like(v)
        e[i] = h
        out[i] = (f(v + e) - f(v - e)) / (2.0 * h)
    return out


def weak_duality_check(p: RegularizedProblem, v_samples: Iterable, policy_samples: Iterable,
                       slack: float = 1e-9) -> GapReport:
    """Largest ``J_P(lam^pi) - J_D(v)`` over all pairs; weak duality says it is at most 0."""
    duals = [dual_value(p, v) for v in v_samples]
    primals = [primal_regularized_value(p, visitation_of_policy(p.mdp, pi)) for pi in policy_samples]
    if not duals or not primals:
        raise InvalidInput("weak duality check needs at least one value vector and one policy")
    worst = max(primals) - min(duals)
    return GapReport("weak_duality", worst, 0.0, slack,
                     {"n_values": len(duals), "n_policies": len(primals),
                      "min_dual": min(duals), "max_primal": max(primals)})


def policy_value_bound_check(p: RegularizedProblem, v_tilde, rho: float, v_ref, slack: float = 1e-7) -> GapReport:
    """Primal loss of the policy extracted from ``v_tilde`` against its gradient-norm bound.

    ``gap = J_P(lam*) - J_P(lam^pi~)`` and
    ``bound = eps ((1 + c) / (1 - gamma) + ||v~||_inf)`` with ``eps = ||grad J_D(v~)||_1``.
    ``lam*`` is the candidate primal at the reference solution ``v_ref``.
    """
    m = p.mdp
    v_tilde = _check_values(m, v_tilde)
    eps = float(np.abs(dual_gradient(p, v_tilde)).sum())
    c = theory_constants(p, rho).c
    policy = policy_from_visitation(candidate_primal(p, v_tilde))
    achieved = primal_regularized_value(p, visitation_of_policy(m, policy))
    optimum = primal_regularized_value(p, candidate_primal(p, v_ref))
    bound = eps * ((1.0 + c) / (1.0 - m.discount) + float(np.abs(v_tilde).max()))
    return GapReport("policy_value_bound", optimum - achieved, bound, slack,
                     {"eps": eps, "c": c, "rho": rho, "regularizer": p.spec.kind})


def smoothness_envelope_check(p: RegularizedProblem, pairs, smoothness: float, norm: str,
                              slack: float = 1e-9) -> GapReport:
    """Largest excess of ``J_D(u)`` over the quadratic upper model built at ``w``."""
    order = {"linf": np.inf, "l2": 2, "l1": 1}[norm]
    worst = -np.inf
    for u, w in pairs:
        u, w = np.asarray(u, dtype=float), np.asarray(w, dtype=float)
        d = u - w
        model = dual_value(p, w) + dual_gradient(p, w) @ d + 0.5 * smoothness * np.linalg.norm(d, order) ** 2
        worst = max(worst, dual_value(p, u) - model)
    return GapReport("smoothness_envelope", worst, 0.0, slack,
                     {"smoothness": smoothness, "norm": norm})


def rate_envelope_check(p: RegularizedProblem, y_T, T: int, v_star_value: float, distance_sq: float,
                        smoothness: float, slack: float = 1e-9) -> GapReport:
    """``J_D(y_T) - J_D(v*) <= 4 alpha ||x0 - v*||^2 / T^2``."""
    gap = dual_value(p, y_T) - v_star_value
    bound = 4.0 * smoothness * distance_sq / T**2
    return GapReport("agd_rate", gap, bound, slack, {"T": T, "smoothness": smoothness})


def certified_gap(value: float, reference_value: float) -> float:
    """Objective gap rounded up by the floating-point error of the two evaluations."""
    scale = max(1.0, abs(value), abs(reference_value))
    return max(value - reference_value, 0.0) + 8.0 * np.finfo(float).eps * scale


def gradient_certificate_check(log: IterateLog, reference_value: float, smoothness: float,
                               norm: str = "grad_l1", slack: float = 1e-9) -> GapReport:
    """Gradient-norm certificate at every logged iterate; reports the worst excess."""
    jd, gn = log.column("jd"), log.column(norm)
    excess = [g - gradient_bound(smoothness, certified_gap(f, reference_value)) for f, g in zip(jd, gn)]
    worst = max(excess)
    return GapReport("gradient_certificate", worst, 0.0, slack,
                     {"iterates": len(excess), "violations": int(sum(e > slack for e in excess)),
                      "smoothness": smoothness, "norm": norm})


def dispersion_check(log: IterateLog) -> GapReport:
    """Count of SGD steps whose estimator spread exceeded its bound (recorded during the run)."""
    n = int(log.meta.get("dispersion_violations", 0))
    return GapReport("estimator_dispersion", float(n), 0.0, 0.0, {"steps": len(log)})


def _random_policy(rng, shape):
    return rng.dirichlet(np.ones(shape[1]), size=shape[0])


def visitation_floor(m: Mdp, n_policies: int, seed) -> float:
    """Smallest state visitation seen over uniform, sampled and (when few enough) all deterministic policies.

    With ``|A|^|S| <= 1024`` the deterministic policies are enumerated and the
    result is the exact minimum over all policies.
    """
    if n_policies < 1:
        raise InvalidInput(f"n_policies must be at least 1, got {n_policies}")
    rng = as_generator(seed)
    S, A = m.shape
    rho = float(state_visitation(m, uniform_policy(m)).min())
    for _ in range(n_policies):
        rho = min(rho, float(state_visitation(m, _random_policy(rng, m.shape)).min()))
    if A**S <= ENUMERATION_LIMIT:
        eye = np.eye(A)
        for actions in itertools.product(range(A), repeat=S):
            rho = min(rho, float(state_visitation(m, eye[list(actions)]).min()))
    return rho


def floor_is_exact(m: Mdp) -> bool:
    S, A = m.shape
    return A**S <= ENUMERATION_LIMIT


def _rollouts(m: Mdp, policy, starts, horizon, rng):
    S, A = m.shape
    cdf_pi = np.cumsum(policy, axis=1)
    cdf_pi[:, -1] = 1.0
    cdf_p = np.cumsum(m.transition.reshape(S * A, S), axis=1)
    cdf_p[:, -1] = 1.0
    s = starts.copy()
    for k in range(horizon):
        a = np.minimum((rng.random(s.size)[:, None] >= cdf_pi[s]).sum(axis=1), A - 1)
        yield k, s, a
        nxt = (rng.random(s.size)[:, None] >= cdf_p[s * A + a]).sum(axis=1)
        s = np.minimum(nxt, S - 1)


def monte_carlo_policy_value(m: Mdp, policy, n_traj: int, horizon: int, seed):
    """Mean and standard error of truncated discounted returns, ``n_traj`` rollouts per start state."""
    pi = validate_policy(m, policy)
    rng = as_generator(seed)
    starts = np.repeat(np.arange(m.n_states), n_traj)
    ret = np.zeros(starts.size)
    for k, s, a in _rollouts(m, pi, starts, horizon, rng):
        ret += m.discount**k * m.reward[s, a]
    ret = ret.reshape(m.n_states, n_traj)
    return ret.mean(axis=1), ret.std(axis=1, ddof=1) / np.sqrt(n_traj)


def monte_carlo_visitation(m: Mdp, policy, n_traj: int, horizon: int, seed):
    """Mean and standard error of ``(1 - gamma) sum_k gamma^k 1(s_k = s, a_k = a)`` from ``mu``."""
    pi = validate_policy(m, policy)
    rng = as_generator(seed)
    S, A = m.shape
    starts = rng.choice(S, size=n_traj, p=m.initial)
    per_traj = np.zeros((n_traj, S * A))
    for k, s, a in _rollouts(m, pi, starts, horizon, rng):
        per_traj[np.arange(n_traj), s * A + a] += (1.0 - m.discount) * m.discount**k
    first = per_traj.mean(axis=0).reshape(S, A)
    second = per_traj.std(axis=0, ddof=1).reshape(S, A) / np.sqrt(n_traj)
    return first, second
