"""The regularized dual objective, its derivatives, and the associated primal quantities.

For a value vector ``v`` the advantage is ``A^v = r - v + gamma P v`` and the
dual objective is ``J_D(v) = (1 - gamma) <mu, v> + F*(A^v)``.  Its gradient is
minus the flow residual of the candidate primal ``grad F*(A^v)``, which is
how :func:`dual_gradient` computes it.

``J_D`` is invariant under ``v -> v + c * 1`` because ``F*(u + c) = F*(u) + c``
and the advantage shifts by ``-(1 - gamma) c``.  Minimisers therefore form a
line, and gradients always sum to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import BadRho, ShapeMismatch
from .mdp import Mdp, _check_table, _check_values, flow_residual
from .regularizers import ConjugateResult, KlSpec, TsallisSpec

Regularizer = Union[KlSpec, TsallisSpec]


@dataclass(frozen=True)
class RegularizedProblem:
    """An MDP together with the regularizer of its occupancy-measure LP."""

    mdp: Mdp
    spec: Regularizer

    def __post_init__(self):
        if self.spec.reference.q.shape != self.mdp.shape:
            raise ShapeMismatch(
                f"reference shape {self.spec.reference.q.shape} does not match MDP {self.mdp.shape}"
            )

    @property
    def beta(self) -> float:
        return self.spec.reference.beta

    @property
    def eta(self) -> float:
        return self.spec.eta


class SoftWeights(NamedTuple):
    """``b = exp(eta A) / Z`` with ``Z = sum exp(eta A) q`` so that ``sum b q = 1``."""

    b: np.ndarray
    log_z: float


class TheoryConstants(NamedTuple):
    smoothness: float
    radius: float
    c: float
    c_prime: float
    c_double_prime: float
    norm: str  # dual norm in which ``smoothness`` holds: "linf" (KL) or "l2" (Tsallis)


def advantage(m: Mdp, v) -> np.ndarray:
    """``A[s, a] = r[s, a] - v[s] + gamma * sum_s2 P[s, a, s2] v[s2]``."""
    v = _check_values(m, v)
    return m.reward - v[:, None] + m.discount * (m.transition @ v)


def _conjugate_at(p: RegularizedProblem, v) -> ConjugateResult:
    return p.spec.conjugate(advantage(p.mdp, v))


def dual_value(p: RegularizedProblem, v) -> float:
    m = p.mdp
    v = _check_values(m, v)
    res = _conjugate_at(p, v)
    return float((1.0 - m.discount) * (m.initial @ v) + res.value)


def candidate_primal(p: RegularizedProblem, v) -> np.ndarray:
    """The conjugate maximiser ``grad F*(A^v)``: a softmax (KL) or water-filled power (Tsallis)."""
    return _conjugate_at(p, v).argmax


def dual_gradient(p: RegularizedProblem, v) -> np.ndarray:
    """``(1 - gamma) mu - M lam`` with ``lam`` the candidate primal; equals minus its flow residual."""
    return -flow_residual(p.mdp, candidate_primal(p, v))


def dual_value_and_gradient(p: RegularizedProblem, v) -> tuple[float, np.ndarray]:
    m = p.mdp
    v = _check_values(m, v)
    res = _conjugate_at(p, v)
    value = float((1.0 - m.discount) * (m.initial @ v) + res.value)
    return value, -flow_residual(m, res.argmax)


def soft_weights(p: RegularizedProblem, v) -> SoftWeights:
    """KL soft weights ``B^v``; the candidate primal is ``B^v * q``."""
    if p.spec.kind != "kl":
        raise TypeError("soft weights are defined for the KL regularizer only")
    res = _conjugate_at(p, v)
    return SoftWeights(res.argmax / p.spec.reference.q, res.normalizer)


def _flow_matrix(m: Mdp) -> np.ndarray:
    """``M[s, (s2, a)] = 1(s2 == s) - gamma P[s2, a, s]``, so that ``A^v = r - M^T v``."""
    S, A = m.shape
    M = -m.discount * m.transition.reshape(S * A, S).T
    M[np.repeat(np.arange(S), A), np.arange(S * A)] += 1.0
    return M


def dual_hessian(p: RegularizedProblem, v) -> np.ndarray:
    """Exact Hessian ``M H M^T`` where ``H`` is the Jacobian of the conjugate maximiser."""
    m, spec = p.mdp, p.spec
    res = _conjugate_at(p, v)
    lam = res.argmax.ravel()
    if spec.kind == "kl":
        H = spec.eta * (np.diag(lam) - np.outer(lam, lam))
    else:
        a = spec.alpha
        power = 1.0 / (a - 1.0)
        k = spec.eta * (a - 1.0) / a
        shifted = advantage(m, v).ravel() + res.normalizer
        support = shifted > 0
        w = np.zeros_like(lam)
        w[support] = spec.reference.q.ravel()[support] * power * k**power * shifted[support] ** (power - 1.0)
        H = np.diag(w) - np.outer(w, w) / w.sum()
    M = _flow_matrix(m)
    return M @ H @ M.T


def primal_regularized_value(p: RegularizedProblem, lam) -> float:
    """``J_P(lam) = <lam, r> - F(lam)``."""
    lam = _check_table(p.mdp, lam)
    return float(np.sum(lam * p.mdp.reward) - p.spec.value(lam))


def lagrangian(p: RegularizedProblem, lam, v) -> float:
    """``J_L(lam, v) = (1 - gamma) <mu, v> + <lam, A^v> - F(lam)``, affine in ``v``."""
    m = p.mdp
    lam = _check_table(m, lam)
    v = _check_values(m, v)
    return float(
        (1.0 - m.discount) * (m.initial @ v) + np.sum(lam * advantage(m, v)) - p.spec.value(lam)
    )


def smoothness_constant(p: RegularizedProblem) -> float:
    """``(|S| + 1) eta`` in the sup norm for KL, ``eta |S||A| / alpha`` in the Euclidean norm for Tsallis."""
    S, A = p.mdp.shape
    if p.spec.kind == "kl":
        return (S + 1) * p.eta
    return p.eta * S * A / p.spec.alpha


def dual_radius(p: RegularizedProblem, rho: float | None = None) -> float:
    """Sup-norm bound on a suitably shifted dual optimum.

    KL needs the visitation floor ``rho``; the Tsallis bound does not.
    """
    m, eta, beta = p.mdp, p.eta, p.beta
    scale = 1.0 / (1.0 - m.discount)
    if p.spec.kind == "kl":
        if rho is None:
            raise BadRho("the KL dual radius needs a visitation floor rho")
        n = m.n_states * m.n_actions
        return scale * (1.0 + math.log(n / (beta * rho)) / eta)
    a = p.spec.alpha
    return scale * (1.0 + 2.0 / (eta * (a - 1.0) * beta ** (a - 1.0)))


def theory_constants(p: RegularizedProblem, rho: float) -> TheoryConstants:
    """Smoothness, dual radius and the constants of the gradient-to-policy bounds.

    For Tsallis ``c_double_prime`` stores ``c + c_prime``, the combination
    that plays the role of the KL ``c''`` in the iteration counts.
    """
    m, eta, beta = p.mdp, p.eta, p.beta
    S, A = m.shape
    if not 0.0 < rho <= 1.0 / S:
        raise BadRho(f"rho must lie in (0, 1/{S}], got {rho!r}")
    if p.spec.kind == "kl":
        c = (1.0 + math.log(1.0 / (rho**3 * beta))) / eta
        c1 = math.log(S * A / (beta * rho)) / eta
        c2 = (1.0 + math.log(S * A / (beta**2 * rho**4))) / eta
        return TheoryConstants(smoothness_constant(p), dual_radius(p, rho), c, c1, c2, "linf")
    a = p.spec.alpha
    base = 1.0 / (eta * (a - 1.0) * beta ** (a - 1.0))
    c = base * (max(a - 1.0, 2.0 / rho ** (a - 1.0)) + 2.0)
    c1 = 2.0 * base
    return TheoryConstants(smoothness_constant(p), dual_radius(p, rho), c, c1, c + c1, "l2")


def reduce_shift(p: RegularizedProblem, v) -> np.ndarray:
    """Shift ``v`` along the all-ones direction to the representative the radius bound refers to.

    KL: the representative whose advantage has ``log Z = 0``.  Tsallis: the one
    whose water-filling normaliser equals ``1 / (eta (alpha - 1))``.  Both
    leave ``J_D`` and its gradient unchanged.
    """
    m = p.mdp
    v = _check_values(m, v)
    res = _conjugate_at(p, v)
    gap = 1.0 - m.discount
    if p.spec.kind == "kl":
        return v + res.normalizer / (p.eta * gap)
    target = 1.0 / (p.eta * (p.spec.alpha - 1.0))
    return v + (target - res.normalizer) / gap
