"""KL and Tsallis regularizers on the simplex and their constrained conjugates.

For a regularizer ``F`` on the probability simplex the constrained conjugate is
``F*(u) = max_x <x, u> - F(x)``.  Its maximiser is ``grad F*(u)`` and is what
the dual objective calls the candidate primal.  Both regularizers here are
normalised so that ``F*(u + c) = F*(u) + c``.

All functions accept any array shape as long as ``u`` (or ``lam``) matches the
shape of the reference distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr

from .errors import (
    BisectionNoBracket,
    DimensionTooLarge,
    InvalidInput,
    NonFiniteInput,
    ShapeMismatch,
    ZeroReferenceMass,
)
from .mdp import ReferenceDistribution
from .simplex import project_simplex


@dataclass(frozen=True)
class KlSpec:
    """``F(lam) = (1/eta) * sum lam * (log(lam / q) - 1)``."""

    eta: float
    reference: ReferenceDistribution

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidInput(f"eta must be positive, got {self.eta!r}")

    kind = "kl"

    def value(self, lam):
        return kl_value(lam, self)

    def conjugate(self, u):
        return kl_conjugate(u, self)

    def gradient(self, lam):
        q = self.reference.q.reshape(np.shape(lam))
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(lam, 1e-300) / q) / self.eta


@dataclass(frozen=True)
class TsallisSpec:
    """``F(lam) = (1/eta) * (sum q (lam/q)^alpha - 1) / (alpha - 1)`` with ``1 < alpha <= 2``."""

    eta: float
    alpha: float
    reference: ReferenceDistribution

    def __post_init__(self):
        if not self.eta > 0:
            raise InvalidInput(f"eta must be positive, got {self.eta!r}")
        if not 1.0 < self.alpha <= 2.0:
            raise InvalidInput(f"Tsallis index must lie in (1, 2], got {self.alpha!r}")

    kind = "tsallis"

    def value(self, lam):
        return tsallis_value(lam, self)

    def conjugate(self, u):
        return tsallis_conjugate(u, self)

    def gradient(self, lam):
        q = self.reference.q.reshape(np.shape(lam))
        a = self.alpha
        return a / (self.eta * (a - 1.0)) * (np.maximum(lam, 0.0) / q) ** (a - 1.0)


Regularizer = Union[KlSpec, TsallisSpec]


class ConjugateResult(NamedTuple):
    value: float
    argmax: np.ndarray
    normalizer: float  # log Z for KL, x_* for Tsallis


def _reference_for(x, spec) -> np.ndarray:
    q = spec.reference.q
    if np.size(x) != q.size:
        raise ShapeMismatch(f"argument has {np.size(x)} entries, reference has {q.size}")
    q = q.reshape(np.shape(x))
    if q.min() <= 0:
        raise ZeroReferenceMass("reference distribution has a zero entry")
    return q


def kl_value(lam, spec: KlSpec) -> float:
    lam = np.asarray(lam, dtype=float)
    q = _reference_for(lam, spec)
    return float((rel_entr(lam, q).sum() - lam.sum()) / spec.eta)


def kl_conjugate(u, spec: KlSpec) -> ConjugateResult:
    """``F*(u) = (1/eta) log sum exp(eta u) q + 1/eta`` with a max-shifted log-sum-exp."""
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFiniteInput("conjugate argument has non-finite entries")
    q = _reference_for(u, spec)
    z = spec.eta * u
    shift = z.max()
    w = np.exp(z - shift) * q
    total = w.sum()
    log_z = np.log(total) + shift
    return ConjugateResult(float((log_z + 1.0) / spec.eta), w / total, float(log_z))


def tsallis_value(lam, spec: TsallisSpec) -> float:
    lam = np.asarray(lam, dtype=float)
    q = _reference_for(lam, spec)
    a = spec.alpha
    ratio = np.maximum(lam, 0.0) / q
    return float((np.sum(q * ratio**a) - 1.0) / (spec.eta * (a - 1.0)))


def _tsallis_weights(u, x, q, spec: TsallisSpec) -> np.ndarray:
    a = spec.alpha
    k = spec.eta * (a - 1.0) / a
    return q * np.maximum(k * (u + x), 0.0) ** (1.0 / (a - 1.0))


def tsallis_conjugate(u, spec: TsallisSpec, max_iter: int = 500) -> ConjugateResult:
    """Water-filling maximiser ``lam(u) = q * (k (u + x_*))_+^(1/(alpha-1))``, ``k = eta (alpha-1)/alpha``.

    The shift ``x_*`` is the root of the nondecreasing map ``x -> sum lam(u; x) - 1``,
    found by Brent's safeguarded bisection on a bracket that always contains
    it.  The value is evaluated as ``<lam, u> - F(lam)``.
    """
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise NonFiniteInput("conjugate argument has non-finite entries")
    q = _reference_for(u, spec)
    a, eta = spec.alpha, spec.eta
    c0 = a / (eta * (a - 1.0)) * (1.0 / q.min()) ** (a - 1.0)
    span = np.abs(u).max() + c0
    lo, hi = -span, span

    def excess(x):
        return _tsallis_weights(u, x, q, spec).sum() - 1.0

    if excess(lo) > 0.0 or excess(hi) < 0.0:
        raise BisectionNoBracket(f"normalisation map does not bracket 1 on [{lo}, {hi}]")
    x_star = brentq(excess, lo, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=max_iter)
    lam = _tsallis_weights(u, x_star, q, spec)
    lam = lam / lam.sum()
    value = float(np.sum(lam * u) - tsallis_value(lam, spec))
    return ConjugateResult(value, lam, float(x_star))


def tsallis_conjugate_algebraic(u, spec: TsallisSpec) -> float:
    """Closed-form conjugate value ``<lam, u - (u + x_*)/alpha> + 1/(eta (alpha - 1))``.

    Follows from substituting the stationarity condition into ``<lam, u> - F(lam)``;
    kept as an independent cross-check of :func:`tsallis_conjugate`.
    """
    res = tsallis_conjugate(u, spec)
    u = np.asarray(u, dtype=float)
    a = spec.alpha
    return float(np.sum(res.argmax * (u - (u + res.normalizer) / a)) + 1.0 / (spec.eta * (a - 1.0)))


def conjugate(u, spec: Regularizer) -> ConjugateResult:
    return spec.conjugate(u)


def regularizer_value(lam, spec: Regularizer) -> float:
    return spec.value(lam)


def conjugate_bruteforce(u, spec: Regularizer, tol: float = 1e-10, restarts: int = 32,
                         max_iter: int = 20_000, memory: int = 10) -> float:
    """Maximise ``<x, u> - F(x)`` over the simplex by projected gradient ascent.

    Uses only ``F`` and its gradient, never the closed-form conjugate.  Each
    iteration projects one Barzilai-Borwein step onto the simplex and
    backtracks along the resulting feasible direction with a nonmonotone
    acceptance test over the last ``memory`` values (spectral projected
    gradient).  All restarts run together; each stops once its
    projected-gradient norm is at most ``tol`` or it can no longer make
    progress in floating point.  Returns the best objective value found.
    """
    u = np.asarray(u, dtype=float).ravel()
    d = u.size
    if d > 64:
        raise DimensionTooLarge(f"brute-force conjugate is limited to 64 coordinates, got {d}")
    q = spec.reference.q.ravel()

    def objective(x):
        return x @ u - _batch_value(x, q, spec)

    def gradient(x):
        g = u[None, :] - _batch_gradient(x, q, spec)
        return g - g.mean(axis=1, keepdims=True)  # the projection ignores constant shifts

    rng = np.random.default_rng(0)
    starts = [np.full(d, 1.0 / d), q.copy()]
    starts += list(rng.dirichlet(np.ones(d), size=restarts - len(starts)))
    x = np.array(starts[:restarts])
    x = 0.999 * x + 0.001 / d  # keep KL gradients finite at the start
    f = objective(x)
    g = gradient(x)
    history = np.repeat(f[:, None], memory, axis=1)
    step = np.ones(len(x))
    active = np.ones(len(x), dtype=bool)
    for it in range(max_iter):
        idx = np.nonzero(active)[0]
        if not len(idx):
            break
        xa, fa, ga = x[idx], f[idx], g[idx]
        direction = project_simplex(xa + step[idx, None] * ga) - xa
        slope = np.sum(ga * direction, axis=1)
        floor = history[idx].min(axis=1)
        lam = np.ones(len(idx))
        xn, fn = xa.copy(), fa.copy()
        pending = slope > 0
        for _ in range(60):
            if not pending.any():
                break
            trial = xa + lam[:, None] * direction
            ft = objective(trial)
            good = pending & (ft >= floor + 1e-4 * lam * slope)
            xn[good], fn[good] = trial[good], ft[good]
            pending &= ~good
            lam = np.where(pending, 0.5 * lam, lam)
        gn = gradient(xn)
        s_, y_ = xn - xa, ga - gn
        sy = np.sum(s_ * y_, axis=1)
        ss = np.sum(s_ * s_, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step[idx] = np.clip(np.where(sy > 0, ss / sy, 1e6), 1e-12, 1e6)
        x[idx], f[idx], g[idx] = xn, fn, gn
        history[idx, it % memory] = fn
        pg = np.linalg.norm(project_simplex(xn + gn) - xn, axis=1)
        stuck = pending | (ss == 0)
        active[idx[(pg <= tol) | stuck]] = False
    return float(f.max())


def _batch_value(x, q, spec):
    if spec.kind == "kl":
        return (rel_entr(x, q[None, :]).sum(axis=1) - x.sum(axis=1)) / spec.eta
    a = spec.alpha
    return (np.sum(q * (np.maximum(x, 0.0) / q) ** a, axis=1) - 1.0) / (spec.eta * (a - 1.0))


def _batch_gradient(x, q, spec):
    if spec.kind == "kl":
        return np.log(np.maximum(x, 1e-300) / q) / spec.eta
    a = spec.alpha
    return a / (spec.eta * (a - 1.0)) * (np.maximum(x, 0.0) / q) ** (a - 1.0)
