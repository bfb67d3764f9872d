"""Finite discounted MDPs: representation, exact evaluation and occupancy measures.

Arrays follow one layout throughout the package:

* ``transition[s, a, s2]`` is the probability of moving to ``s2`` after ``a`` in ``s``;
* ``reward[s, a]`` lies in [0, 1];
* policies and visitations are ``(n_states, n_actions)`` arrays;
* value vectors are ``(n_states,)`` arrays.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadBranching,
    BadDiscount,
    BadInitialDistribution,
    FloorTooLarge,
    InvalidInput,
    NegativeMass,
    RewardOutOfRange,
    RowNotStochastic,
    ShapeMismatch,
    SingularSystem,
)

logger = logging.getLogger(__name__)

ROW_TOL = 1e-12
AGGREGATE_TOL = 1e-10


def _frozen(x) -> np.ndarray:
    arr = np.array(x, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Mdp:
    """A finite MDP ``(S, A, P, r, mu, gamma)``.

    Construction only checks array shapes; call :func:`validate_mdp` for the
    probabilistic invariants.
    """

    transition: np.ndarray
    reward: np.ndarray
    initial: np.ndarray
    discount: float

    def __post_init__(self):
        object.__setattr__(self, "transition", _frozen(self.transition))
        object.__setattr__(self, "reward", _frozen(self.reward))
        object.__setattr__(self, "initial", _frozen(self.initial))
        object.__setattr__(self, "discount", float(self.discount))
        P, r, mu = self.transition, self.reward, self.initial
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ShapeMismatch(f"transition must have shape (S, A, S), got {P.shape}")
        if r.shape != P.shape[:2]:
            raise ShapeMismatch(f"reward shape {r.shape} does not match transition {P.shape}")
        if mu.shape != (P.shape[0],):
            raise ShapeMismatch(f"initial shape {mu.shape} does not match {P.shape[0]} states")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.transition.shape[:2]

    def __eq__(self, other):
        if not isinstance(other, Mdp):
            return NotImplemented
        return (
            self.discount == other.discount
            and np.array_equal(self.transition, other.transition)
            and np.array_equal(self.reward, other.reward)
            and np.array_equal(self.initial, other.initial)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class ReferenceDistribution:
    """Fully supported state-action distribution ``q`` with floor ``beta = min q``."""

    q: np.ndarray
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen(self.q))
        object.__setattr__(self, "beta", float(self.beta))
        if self.q.ndim != 2:
            raise ShapeMismatch(f"reference must be a (S, A) table, got shape {self.q.shape}")
        if not self.beta > 0:
            raise InvalidInput(f"reference floor must be positive, got {self.beta}")
        if abs(self.q.sum() - 1.0) > AGGREGATE_TOL:
            raise InvalidInput(f"reference sums to {self.q.sum()!r}, not 1")
        if self.q.min() < self.beta:
            raise InvalidInput(f"reference minimum {self.q.min()!r} is below the floor {self.beta!r}")


def validate_mdp(m: Mdp) -> None:
    """Raise if ``m`` violates a probabilistic invariant; return ``None`` otherwise."""
    if not 0.0 < m.discount < 1.0:
        raise BadDiscount(f"discount must lie strictly inside (0, 1), got {m.discount!r}")
    P = m.transition
    sums = P.sum(axis=2)
    for s, a in zip(*np.nonzero((np.abs(sums - 1.0) > ROW_TOL) | (P.min(axis=2) < 0))):
        raise RowNotStochastic(int(s), int(a), float(sums[s, a]))
    r = m.reward
    bad = ~((r >= 0.0) & (r <= 1.0))
    for s, a in zip(*np.nonzero(bad)):
        raise RewardOutOfRange(int(s), int(a), float(r[s, a]))
    mu = m.initial
    if mu.min() < 0 or abs(mu.sum() - 1.0) > ROW_TOL:
        raise BadInitialDistribution(f"initial distribution sums to {mu.sum()!r} or has negative entries")


def validate_policy(m: Mdp, policy) -> np.ndarray:
    pi = np.asarray(policy, dtype=float)
    if pi.shape != m.shape:
        raise ShapeMismatch(f"policy shape {pi.shape} does not match MDP {m.shape}")
    if pi.min() < 0 or np.max(np.abs(pi.sum(axis=1) - 1.0)) > ROW_TOL:
        raise InvalidInput("policy rows must be probability distributions")
    return pi


def _check_values(m: Mdp, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (m.n_states,):
        raise ShapeMismatch(f"value vector shape {v.shape} does not match {m.n_states} states")
    return v


def _check_table(m: Mdp, x, what="visitation") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != m.shape:
        raise ShapeMismatch(f"{what} shape {x.shape} does not match MDP {m.shape}")
    return x


def uniform_policy(m: Mdp) -> np.ndarray:
    return np.full(m.shape, 1.0 / m.n_actions)


def policy_transition(m: Mdp, policy) -> np.ndarray:
    """State-to-state matrix ``P_pi[s, s2] = sum_a pi(a|s) P[s, a, s2]``."""
    return np.einsum("sa,sat->st", policy, m.transition)


def policy_value(m: Mdp, policy) -> np.ndarray:
    """Exact value vector ``v^pi``, the solution of ``(I - gamma P_pi) v = r_pi``."""
    pi = validate_policy(m, policy)
    P_pi = policy_transition(m, pi)
    r_pi = np.sum(pi * m.reward, axis=1)
    lhs = np.eye(m.n_states) - m.discount * P_pi
    try:
        return np.linalg.solve(lhs, r_pi)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def state_visitation(m: Mdp, policy) -> np.ndarray:
    """Discounted state visitation ``lambda^pi_s`` (sums to one)."""
    pi = validate_policy(m, policy)
    P_pi = policy_transition(m, pi)
    lhs = np.eye(m.n_states) - m.discount * P_pi.T
    try:
        return np.linalg.solve(lhs, (1.0 - m.discount) * m.initial)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc


def visitation_of_policy(m: Mdp, policy) -> np.ndarray:
    """State-action occupancy ``lambda^pi_{s,a} = lambda^pi_s * pi(a|s)``."""
    pi = validate_policy(m, policy)
    return state_visitation(m, pi)[:, None] * pi


def policy_from_visitation(lam) -> np.ndarray:
    """Row-normalise a nonnegative ``(S, A)`` table into a policy.

    States carrying no mass get the uniform action distribution.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 2:
        raise ShapeMismatch(f"visitation must be a (S, A) table, got shape {lam.shape}")
    neg = np.argwhere(lam < 0)
    if len(neg):
        s, a = neg[0]
        raise NegativeMass(int(s), int(a), float(lam[s, a]))
    mass = lam.sum(axis=1, keepdims=True)
    uniform = np.full_like(lam, 1.0 / lam.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(mass > 0, lam / np.where(mass > 0, mass, 1.0), uniform)


def flow_residual(m: Mdp, lam) -> np.ndarray:
    """Signed violation of the flow constraints, one entry per state.

    ``res_s = sum_a lam[s, a] - (1 - gamma) mu_s - gamma sum_{s2, a} P[s2, a, s] lam[s2, a]``
    """
    lam = _check_table(m, lam)
    inflow = np.einsum("ua,uas->s", lam, m.transition)
    return lam.sum(axis=1) - (1.0 - m.discount) * m.initial - m.discount * inflow


def primal_return(lam, m: Mdp) -> float:
    """Normalised return ``sum_{s,a} lam[s, a] r[s, a]``."""
    lam = _check_table(m, lam)
    return float(np.sum(lam * m.reward))


def _uniform_floor(m: Mdp) -> float:
    return float(state_visitation(m, uniform_policy(m)).min())


def _garnet(rng: np.random.Generator, n_states, n_actions, branching, gamma) -> Mdp:
    P = np.zeros((n_states, n_actions, n_states))
    for s in range(n_states):
        for a in range(n_actions):
            support = rng.choice(n_states, size=branching, replace=False)
            P[s, a, support] = rng.dirichlet(np.ones(branching))
    reward = rng.uniform(0.0, 1.0, size=(n_states, n_actions))
    initial = np.full(n_states, 1.0 / n_states)
    return Mdp(P, reward, initial, gamma)


def random_mdp(seed: int, n_states: int, n_actions: int, branching: int, gamma: float,
               max_probes: int = 1000) -> Mdp:
    """Garnet instance: each ``(s, a)`` row has ``branching`` successors with Dirichlet(1) weights.

    Rewards are i.i.d. uniform on [0, 1] and the initial distribution is uniform.
    An instance on which the uniform policy leaves some state unvisited is
    rejected and the generator retries with ``seed + 1``, ``seed + 2``, ...
    """
    if not 1 <= branching <= n_states:
        raise BadBranching(f"branching must lie in [1, {n_states}], got {branching}")
    if n_states < 1 or n_actions < 1:
        raise InvalidInput("need at least one state and one action")
    for probe in range(max_probes):
        rng = np.random.default_rng(np.random.SeedSequence(seed + probe))
        m = _garnet(rng, n_states, n_actions, branching, gamma)
        validate_mdp(m)
        if _uniform_floor(m) > 0:
            if probe:
                logger.info("random_mdp: seed %d rejected, accepted seed %d", seed, seed + probe)
            return m
    raise InvalidInput(f"no acceptable instance within {max_probes} probes from seed {seed}")


def uniform_reference(m: Mdp) -> ReferenceDistribution:
    n = m.n_states * m.n_actions
    return ReferenceDistribution(np.full(m.shape, 1.0 / n), 1.0 / n)


def behavior_reference(m: Mdp, behavior, floor: float) -> ReferenceDistribution:
    """Mix the behaviour policy's occupancy with a uniform floor.

    ``q = (1 - floor * |S||A|) * lambda^behavior + floor``, so ``min q >= floor``.
    """
    n = m.n_states * m.n_actions
    if not 0.0 < floor < 1.0 / n:
        raise FloorTooLarge(f"floor must lie in (0, 1/{n}), got {floor!r}")
    lam = visitation_of_policy(m, behavior)
    q = (1.0 - floor * n) * lam + floor
    return ReferenceDistribution(q, float(q.min()))
