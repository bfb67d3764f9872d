"""Sampled transitions, the plug-in gradient estimator and projected stochastic descent on the KL dual.

Samples are pairs ``(s, a) ~ q`` with successors ``s2 ~ P[s, a]``.  From a
batch of them one builds the empirical model

* ``W[s, a]``: mean of ``v[s2]`` over samples at ``(s, a)``,
* ``A_hat = r - v + gamma W`` and ``q_hat = N / t``,
* ``B_hat = exp(eta A_hat) / Z_hat`` with ``Z_hat = sum exp(eta A_hat) q_hat``,

and one fresh sample ``(s, a, s2)`` turns it into the two-coordinate gradient
estimate ``(1 - gamma) mu + B_hat[s, a] (gamma e_{s2} - e_s)``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .agd import IterateLog, LOG_COLUMNS, _norms, project_linf
from .dual import RegularizedProblem, dual_value, dual_value_and_gradient
from .errors import InvalidInput
from .mdp import Mdp, ReferenceDistribution, _check_values
from .rng import as_generator

SGD_COLUMNS = LOG_COLUMNS + ("cum_samples", "jd_avg")


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Sampled transitions as triples plus their tallies.

    ``counts[s, a]`` is the number of samples at ``(s, a)`` and
    ``successors[s, a, s2]`` the number of those that moved to ``s2``.
    """

    triples: np.ndarray
    counts: np.ndarray
    successors: np.ndarray
    seed: object = None

    @property
    def size(self) -> int:
        return int(self.counts.sum())


def _successor_cdf(m: Mdp) -> np.ndarray:
    S, A = m.shape
    cdf = np.cumsum(m.transition.reshape(S * A, S), axis=1)
    cdf[:, -1] = 1.0
    return cdf


def _sample_pairs(m: Mdp, q: ReferenceDistribution, count: int, rng: np.random.Generator):
    S, A = m.shape
    pair = rng.choice(S * A, size=count, p=q.q.ravel() / q.q.sum())
    cdf = _successor_cdf(m)[pair]
    nxt = (rng.random(count)[:, None] >= cdf).sum(axis=1)
    return pair // A, pair % A, np.minimum(nxt, S - 1)


def draw_transitions(m: Mdp, q: ReferenceDistribution, count: int, seed) -> SampleBatch:
    if count < 1:
        raise InvalidInput(f"count must be at least 1, got {count}")
    S, A = m.shape
    s, a, s2 = _sample_pairs(m, q, count, as_generator(seed))
    successors = np.zeros((S, A, S), dtype=np.int64)
    np.add.at(successors, (s, a, s2), 1)
    return SampleBatch(np.column_stack([s, a, s2]), successors.sum(axis=2), successors, seed)


class SampleStream:
    """A growing sample pool kept only as tallies.

    ``extend(k)`` adds ``k`` transitions by drawing pair counts from
    ``Multinomial(k, q)`` and successor counts from ``Multinomial(n_sa, P[s, a])``.
    This has the same distribution as drawing ``k`` triples one by one and
    tallying them, at a cost independent of ``k``.
    """

    def __init__(self, m: Mdp, q: ReferenceDistribution, seed):
        self.mdp = m
        self.q = q.q.ravel() / q.q.sum()
        self.rng = as_generator(seed)
        S, A = m.shape
        self.successors = np.zeros((S, A, S), dtype=np.int64)
        self.total = 0

    def extend(self, k: int) -> None:
        if k <= 0:
            return
        S, A = self.mdp.shape
        pairs = self.rng.multinomial(k, self.q).reshape(S, A)
        self.successors += self.rng.multinomial(pairs, self.mdp.transition)
        self.total += k

    def grow_to(self, n: int) -> None:
        self.extend(n - self.total)

    @property
    def counts(self) -> np.ndarray:
        return self.successors.sum(axis=2)


class EmpiricalModel(NamedTuple):
    w_hat: np.ndarray
    a_hat: np.ndarray
    q_hat: np.ndarray
    b_hat: np.ndarray
    log_z: float
    unvisited: np.ndarray  # boolean mask of pairs with no samples; their W is set to 0

    @property
    def z_hat(self) -> float:
        return math.exp(self.log_z)


def empirical_model(batch, m: Mdp, v, eta: float) -> EmpiricalModel:
    """Plug-in model from a :class:`SampleBatch` or :class:`SampleStream`."""
    v = _check_values(m, v)
    successors = batch.successors
    counts = successors.sum(axis=2)
    total = counts.sum()
    if total == 0:
        raise InvalidInput("empirical model needs at least one sample")
    unvisited = counts == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(unvisited, 0.0, (successors @ v) / np.where(unvisited, 1, counts))
    a_hat = m.reward - v[:, None] + m.discount * w
    q_hat = counts / total
    z = eta * a_hat
    shift = z.max()
    log_z = float(np.log(np.sum(np.exp(z - shift) * q_hat)) + shift)
    b_hat = np.exp(z - log_z)
    return EmpiricalModel(w, a_hat, q_hat, b_hat, log_z, unvisited)


def exact_model(p: RegularizedProblem, v) -> EmpiricalModel:
    """The model with true transitions and reference, so ``B_hat`` equals the exact ``B``."""
    m, q = p.mdp, p.spec.reference.q
    v = _check_values(m, v)
    w = m.transition @ v
    a = m.reward - v[:, None] + m.discount * w
    z = p.eta * a
    shift = z.max()
    log_z = float(np.log(np.sum(np.exp(z - shift) * q)) + shift)
    return EmpiricalModel(w, a, q.copy(), np.exp(z - log_z), log_z, np.zeros(m.shape, dtype=bool))


def _final_sample(m: Mdp, q: ReferenceDistribution, rng):
    s, a, s2 = _sample_pairs(m, q, 1, rng)
    return int(s[0]), int(a[0]), int(s2[0])


def _estimate_from(model: EmpiricalModel, m: Mdp, s: int, a: int, s2: int) -> np.ndarray:
    g = (1.0 - m.discount) * m.initial.copy()
    weight = model.b_hat[s, a]
    g[s2] += m.discount * weight
    g[s] -= weight
    return g


def gradient_estimate(model: EmpiricalModel, m: Mdp, q: ReferenceDistribution, seed) -> np.ndarray:
    """One-sample estimate built from a fresh ``(s, a) ~ q``, ``s2 ~ P[s, a]``."""
    return _estimate_from(model, m, *_final_sample(m, q, as_generator(seed)))


def conditional_mean_gradient(model: EmpiricalModel, m: Mdp, q: ReferenceDistribution) -> np.ndarray:
    """Expectation of :func:`gradient_estimate` over the fresh sample, with the model held fixed."""
    lam = q.q * model.b_hat
    inflow = np.einsum("ua,uas->s", lam, m.transition)
    return (1.0 - m.discount) * m.initial + m.discount * inflow - lam.sum(axis=1)


def estimator_dispersion_bound(model: EmpiricalModel) -> float:
    """Any-norm bound ``4 max B_hat`` on ``||g_hat - E[g_hat]||`` (both are differences of two-sparse terms)."""
    return 4.0 * float(model.b_hat.max())


def sample_schedule(t: int, m: Mdp, beta: float, delta: float, multiplier: float = 1.0) -> int:
    """``ceil(mult * 525 t (ln(100 |S||A| t^2 / delta) + 1)^3 / (beta |S|^2))``."""
    if t < 1:
        raise InvalidInput(f"t must be at least 1, got {t}")
    S, A = m.shape
    core = 525.0 * t * (math.log(100.0 * S * A * t * t / delta) + 1.0) ** 3 / (beta * S * S)
    return int(math.ceil(multiplier * core))


def step_size(t: int, n_states: int, eta: float, multiplier: float = 1.0) -> float:
    """``tau_t = 1 / (16 |S| eta sqrt(t))``."""
    return multiplier / (16.0 * n_states * eta * math.sqrt(t))


def bias_target(t: int, n_states: int, eta: float, radius: float, multiplier: float = 1.0) -> float:
    """``xi_t = 8 |S| eta D / sqrt(t)``, the bias level the sample schedule is sized for."""
    return multiplier * 8.0 * n_states * eta * radius / math.sqrt(t)


@dataclass(frozen=True)
class SgdConfig:
    """Budget and schedule multipliers for :func:`sgd_solve`.

    The multipliers scale ``xi_t``, ``tau_t`` and ``n(t)``; leave them at 1 for
    the literal schedules.
    """

    total_steps: int
    delta: float
    radius: float
    xi_mult: float = 1.0
    tau_mult: float = 1.0
    n_mult: float = 1.0
    record_every: int = 1
    timed: bool = False

    def __post_init__(self):
        if self.total_steps < 1:
            raise InvalidInput("total_steps must be at least 1")
        if not 0.0 < self.delta < 1.0:
            raise InvalidInput(f"delta must lie in (0, 1), got {self.delta!r}")
        if not self.radius > 0:
            raise InvalidInput("radius must be positive")
        if min(self.xi_mult, self.tau_mult, self.n_mult) <= 0:
            raise InvalidInput("schedule multipliers must be positive")
        if self.record_every < 1:
            raise InvalidInput("record_every must be at least 1")


def sgd_solve(p: RegularizedProblem, cfg: SgdConfig, seed) -> tuple[np.ndarray, IterateLog]:
    """Projected SGD with the plug-in estimator; returns the running average and the log.

    One sample stream is grown to ``n(t)`` and reused by every step; each step
    also draws one fresh final sample from an independent stream.  Besides
    the CSV columns the log's ``meta`` holds the schedule multipliers, the
    number of estimator-dispersion violations and the count of steps whose
    model had unvisited pairs.
    """
    if p.spec.kind != "kl":
        raise InvalidInput("the plug-in estimator is defined for the KL regularizer")
    m, q, eta = p.mdp, p.spec.reference, p.eta
    root = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    pool_seq, final_seq = root.spawn(2)
    pool = SampleStream(m, q, np.random.default_rng(pool_seq))
    final_rng = np.random.default_rng(final_seq)
    S = m.n_states
    v = project_linf(np.zeros(S), cfg.radius)
    total = np.zeros(S)
    log = IterateLog(columns=SGD_COLUMNS, meta={"xi_mult": cfg.xi_mult, "tau_mult": cfg.tau_mult, "n_mult": cfg.n_mult,
                "dispersion_violations": 0, "steps_with_unvisited_pairs": 0, "max_abs_v": 0.0,
                "sample_count_mismatches": 0})
    start = time.perf_counter_ns()
    need = 0
    for t in range(1, cfg.total_steps + 1):
        total += v
        log.meta["max_abs_v"] = max(log.meta["max_abs_v"], float(np.abs(v).max()))
        need = max(need, sample_schedule(t, m, q.beta, cfg.delta, cfg.n_mult))
        pool.grow_to(need)
        if pool.total != need:
            log.meta["sample_count_mismatches"] += 1
        model = empirical_model(pool, m, v, eta)
        if model.unvisited.any():
            log.meta["steps_with_unvisited_pairs"] += 1
        g_hat = _estimate_from(model, m, *_final_sample(m, q, final_rng))
        spread = g_hat - conditional_mean_gradient(model, m, q)
        if np.abs(spread).sum() > estimator_dispersion_bound(model) + 1e-12:
            log.meta["dispersion_violations"] += 1
        if t % cfg.record_every == 0 or t == cfg.total_steps:
            jd, g = dual_value_and_gradient(p, v)
            ns = time.perf_counter_ns() - start if cfg.timed else 0
            log.append(t, jd, *_norms(g), float(np.abs(v).max()), ns, pool.total,
                       dual_value(p, total / t))
        v = project_linf(v - step_size(t, S, eta, cfg.tau_mult) * g_hat, cfg.radius)
    return total / cfg.total_steps, log
