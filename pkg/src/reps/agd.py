"""Accelerated projected gradient descent on the dual, and the step-count/eta rules around it.

The solver is linear coupling with the Euclidean distance generating
function: a short projected gradient step of length ``1/alpha`` and a long
projected step of length ``(t + 2) / (2 alpha)``, mixed with weight
``tau_t = 2 / (t + 2)``.  Both steps are clipped to the sup-norm ball of
radius ``D``.  A function that is ``alpha``-smooth in the sup norm is also
``alpha``-smooth in the Euclidean norm, so the same step sizes serve both
regularizers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dual import (
    RegularizedProblem,
    dual_gradient,
    dual_hessian,
    dual_value,
    dual_value_and_gradient,
    smoothness_constant,
    theory_constants,
)
from .errors import InvalidInput, NonFiniteObjective
from .report import GapReport

LOG_COLUMNS = ("t", "jd", "grad_l1", "grad_l2", "grad_linf", "v_linf", "ns")


def project_linf(v, radius: float) -> np.ndarray:
    """Euclidean projection onto ``{x : ||x||_inf <= radius}`` (componentwise clip)."""
    if not radius > 0:
        raise InvalidInput(f"radius must be positive, got {radius!r}")
    return np.clip(np.asarray(v, dtype=float), -radius, radius)


@dataclass(frozen=True)
class AgdConfig:
    """Iteration budget, stopping rule and ball radius for :func:`accelerated_solve`.

    ``smoothness`` defaults to the theoretical constant of the problem; it is
    a field so that deliberately wrong constants can be injected in negative
    controls.  With ``timed=False`` the ``ns`` column is zero, which keeps
    logs bit-reproducible.
    """

    max_iters: int
    radius: float
    grad_tol_l1: float = 0.0
    record_every: int = 1
    smoothness: float | None = None
    timed: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise InvalidInput("max_iters must be at least 1")
        if self.grad_tol_l1 < 0:
            raise InvalidInput("grad_tol_l1 must be nonnegative")
        if not self.radius > 0:
            raise InvalidInput("radius must be positive")
        if self.record_every < 1:
            raise InvalidInput("record_every must be at least 1")


@dataclass
class IterateLog:
    """Rows of per-iteration diagnostics; ``columns`` names the fields of each row."""

    columns: tuple[str, ...] = LOG_COLUMNS
    rows: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, *values) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(values)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows])

    def __len__(self) -> int:
        return len(self.rows)


def _norms(g):
    return float(np.abs(g).sum()), float(np.sqrt(g @ g)), float(np.abs(g).max())


def accelerated_solve(p: RegularizedProblem, cfg: AgdConfig) -> tuple[np.ndarray, IterateLog]:
    """Run linear-coupling AGD from the origin and return ``(y_T, log)``.

    Stops early once ``||grad J_D(y_t)||_1 <= grad_tol_l1``.  The last iterate is
    always logged.
    """
    alpha = cfg.smoothness if cfg.smoothness is not None else smoothness_constant(p)
    n = p.mdp.n_states
    y = project_linf(np.zeros(n), cfg.radius)
    z = y.copy()
    log = IterateLog()
    start = time.perf_counter_ns()

    def record(t, jd, g, v):
        ns = time.perf_counter_ns() - start if cfg.timed else 0
        log.append(t, jd, *_norms(g), float(np.abs(v).max()), ns)

    jd, g = dual_value_and_gradient(p, y)
    t = 0
    for t in range(cfg.max_iters + 1):
        if not math.isfinite(jd):
            raise NonFiniteObjective(f"dual objective is {jd} at iteration {t}")
        done = np.abs(g).sum() <= cfg.grad_tol_l1 or t == cfg.max_iters
        if done or t % cfg.record_every == 0:
            record(t, jd, g, y)
        if done:
            break
        tau = 2.0 / (t + 2)
        x = (1.0 - tau) * y + tau * z
        gx = dual_gradient(p, x)
        y = project_linf(x - gx / alpha, cfg.radius)
        z = project_linf(z - (t + 2) / (2.0 * alpha) * gx, cfg.radius)
        jd, g = dual_value_and_gradient(p, y)
    return y, log


def newton_polish(p: RegularizedProblem, v, tol: float = 1e-10, max_steps: int = 100) -> np.ndarray:
    """Damped Newton steps on ``J_D`` using the pseudo-inverse of its Hessian.

    The Hessian is singular along the all-ones direction (``J_D`` is constant
    there) and the pseudo-inverse step is orthogonal to it.  Stops once the
    gradient's l1 norm is at most ``tol`` or no step decreases ``J_D``.
    """
    v = np.asarray(v, dtype=float).copy()
    f, g = dual_value_and_gradient(p, v)
    for _ in range(max_steps):
        if np.abs(g).sum() <= tol:
            break
        step = np.linalg.pinv(dual_hessian(p, v), rcond=1e-13) @ g
        for _ in range(50):
            cand = v - step
            fc, gc = dual_value_and_gradient(p, cand)
            if fc <= f or np.abs(gc).sum() < np.abs(g).sum():
                break
            step = 0.5 * step
        else:
            break
        if np.abs(gc).sum() >= np.abs(g).sum() and fc >= f:
            break
        v, f, g = cand, fc, gc
    return v


@dataclass(frozen=True)
class ReferenceSolution:
    """High-precision dual minimiser used as ground truth by the checks."""

    v: np.ndarray
    value: float
    grad_l1: float
    agd_iters: int


def reference_solve(p: RegularizedProblem, radius: float | None = None, tol: float = 1e-10,
                    max_iters: int = 100_000) -> ReferenceSolution:
    """AGD to ``||grad||_1 <= tol`` (or ``max_iters``), then Newton polishing.

    ``radius`` defaults to a ball large enough never to bind.
    """
    if radius is None:
        radius = 1e6
    v, log = accelerated_solve(p, AgdConfig(max_iters=max_iters, radius=radius,
                                            grad_tol_l1=tol, record_every=max_iters))
    v = newton_polish(p, v, tol=min(tol, 1e-12))
    g = dual_gradient(p, v)
    return ReferenceSolution(v, dual_value(p, v), float(np.abs(g).sum()), int(log.rows[-1][0]))


def closest_minimizer(v_star, radius: float | None = None, origin=None) -> np.ndarray:
    """Point of ``{v_star + c 1}`` (inside the ball, if given) nearest to ``origin`` in l2."""
    v_star = np.asarray(v_star, dtype=float)
    origin = np.zeros_like(v_star) if origin is None else np.asarray(origin, dtype=float)
    c = float(np.mean(origin - v_star))
    if radius is not None:
        lo, hi = -radius - v_star.min(), radius - v_star.max()
        if lo > hi:
            raise InvalidInput("no minimiser lies inside the ball")
        c = min(max(c, lo), hi)
    return v_star + c


def eta_for_accuracy(epsilon: float, p: RegularizedProblem, variant: str = "statement") -> float:
    """Regularization strength that makes an epsilon-accurate dual solve yield an epsilon-optimal policy.

    KL: ``1 / (2 eps log(|S||A| / beta))``, or ``1 / (4 eps log(...))`` with
    ``variant="proof"``.  Tsallis: ``2 / ((alpha - 1) eps beta^alpha)``.
    """
    if not epsilon > 0:
        raise InvalidInput(f"epsilon must be positive, got {epsilon!r}")
    S, A = p.mdp.shape
    if p.spec.kind == "kl":
        factor = {"statement": 2.0, "proof": 4.0}.get(variant)
        if factor is None:
            raise InvalidInput(f"unknown variant {variant!r}; expected 'statement' or 'proof'")
        return 1.0 / (factor * epsilon * math.log(S * A / p.beta))
    a = p.spec.alpha
    return 2.0 / ((a - 1.0) * epsilon * p.beta**a)


def iterations_from_constants(xi: float, kind: str, regularizer: str, *, n_states: int,
                              n_actions: int, discount: float, eta: float, c_double_prime: float,
                              alpha: float | None = None, beta: float | None = None) -> int:
    """Ceiling of the worst-case AGD iteration counts.

    ``kind="regularized"`` targets a ``xi``-suboptimal regularized primal;
    ``kind="unregularized"`` targets a ``xi``-optimal policy (``xi`` plays the
    role of epsilon).  For Tsallis ``c_double_prime`` is ``c + c'``.
    """
    if not xi > 0:
        raise InvalidInput(f"xi must be positive, got {xi!r}")
    gap2 = (1.0 - discount) ** 2
    k2 = (2.0 + c_double_prime) ** 2
    if regularizer == "kl":
        size = (n_states + 1) ** 1.5
        if kind == "regularized":
            bound = 4.0 * eta * size * k2 / (gap2 * xi)
        elif kind == "unregularized":
            bound = size * k2 / (gap2 * xi**2)
        else:
            raise InvalidInput(f"unknown kind {kind!r}")
    elif regularizer == "tsallis":
        size = n_states**1.5 * n_actions**0.5
        if kind == "regularized":
            bound = 4.0 * eta * size * k2 / (alpha * gap2 * xi)
        elif kind == "unregularized":
            bound = 8.0 * size * k2 / ((alpha - 1.0) * alpha * gap2 * beta**alpha * xi**2)
        else:
            raise InvalidInput(f"unknown kind {kind!r}")
    else:
        raise InvalidInput(f"unknown regularizer {regularizer!r}")
    return int(math.ceil(bound))


def required_iterations(xi: float, p: RegularizedProblem, kind: str, rho: float) -> int:
    const = theory_constants(p, rho)
    S, A = p.mdp.shape
    return iterations_from_constants(
        xi, kind, p.spec.kind, n_states=S, n_actions=A, discount=p.mdp.discount, eta=p.eta,
        c_double_prime=const.c_double_prime, alpha=getattr(p.spec, "alpha", None), beta=p.beta,
    )


def gradient_bound(smoothness: float, epsilon_obj: float) -> float:
    """``sqrt(2 alpha eps)``: the gradient norm an ``eps``-optimal point of an ``alpha``-smooth function can have."""
    return math.sqrt(2.0 * smoothness * max(epsilon_obj, 0.0))


def suboptimality_certificate(p: RegularizedProblem, v, epsilon_obj: float,
                              smoothness: float | None = None, slack: float = 1e-9) -> GapReport:
    """Check ``||grad J_D(v)|| <= sqrt(2 alpha eps)`` in the dual of the smoothness norm.

    The dual norm is l1 for KL (sup-norm smoothness) and l2 for Tsallis.
    """
    alpha = smoothness if smoothness is not None else smoothness_constant(p)
    g = dual_gradient(p, v)
    l1, l2, _ = _norms(g)
    measured = l1 if p.spec.kind == "kl" else l2
    return GapReport(
        "gradient_certificate", measured, gradient_bound(alpha, epsilon_obj), slack,
        {"epsilon_obj": float(epsilon_obj), "smoothness": float(alpha),
         "norm": "l1" if p.spec.kind == "kl" else "l2"},
    )
