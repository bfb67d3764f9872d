"""Experiment configs and the solve / verify / bench drivers behind the command line.

A config is a JSON document::

    {
      "name": "kl_5x3",
      "seed": 0,
      "instance": {"n_states": 5, "n_actions": 3, "branching": 3, "discount": 0.9, "seed": 11},
      "regularizer": {"kind": "kl", "eta": 1.0, "q": {"mode": "uniform"}},
      "solver": {"method": "agd", "max_iters": 20000, "grad_tol_l1": 1e-10},
      "verify": {"n_instances": 20},
      "rho": {"n_policies": 100},
      "log_wall_time": false
    }

``instance`` may instead hold ``{"path": "mdp.json"}`` (relative to the
config file).  ``regularizer`` takes exactly one of ``eta``, ``epsilon``
(eta chosen by :func:`~reps.agd.eta_for_accuracy`) or ``eta_beta_multiple``
(``eta = multiple / beta``).  Random streams derive from the master seed
with the labels ``"instance"``, ``"rho"``, ``"verify"``, ``"sgd"`` and ``"mc-oracle"``.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import io
from .agd import (
    AgdConfig,
    IterateLog,
    accelerated_solve,
    closest_minimizer,
    eta_for_accuracy,
    reference_solve,
)
from .diagnostics import (
    dispersion_check,
    finite_difference_gradient,
    floor_is_exact,
    gradient_certificate_check,
    policy_suboptimality,
    policy_value_bound_check,
    rate_envelope_check,
    smoothness_envelope_check,
    value_iteration,
    visitation_floor,
    weak_duality_check,
)
from .dual import (
    RegularizedProblem,
    candidate_primal,
    dual_gradient,
    dual_value,
    primal_regularized_value,
    smoothness_constant,
    theory_constants,
)
from .errors import ConfigError
from .mdp import (
    Mdp,
    behavior_reference,
    flow_residual,
    policy_from_visitation,
    random_mdp,
    uniform_policy,
    uniform_reference,
    validate_mdp,
    visitation_of_policy,
)
from .regularizers import KlSpec, TsallisSpec
from .report import GapReport
from .rng import seed_sequence, stream
from .sgd import SgdConfig, sgd_solve


@dataclass(frozen=True)
class InstanceConfig:
    n_states: int = 5
    n_actions: int = 3
    branching: int = 3
    discount: float = 0.9
    seed: int | None = None
    path: str | None = None


@dataclass(frozen=True)
class RegularizerConfig:
    kind: str = "kl"
    eta: float | None = None
    epsilon: float | None = None
    eta_beta_multiple: float | None = None
    variant: str = "statement"
    alpha: float | None = None
    q_mode: str = "uniform"
    q_floor: float | None = None


@dataclass(frozen=True)
class SolverConfig:
    method: str = "agd"
    max_iters: int = 20_000
    grad_tol_l1: float = 1e-10
    record_every: int = 1
    radius: float | None = None
    smoothness_scale: float = 1.0
    total_steps: int = 1_000
    delta: float = 0.1
    xi_mult: float = 1.0
    tau_mult: float = 1.0
    n_mult: float = 1.0


@dataclass(frozen=True)
class VerifyConfig:
    n_instances: int = 20
    n_pairs: int = 200
    n_vtilde: int = 100
    rate_T: tuple[int, ...] = (10, 100, 1000)
    alphas: tuple[float, ...] | None = None
    sgd_steps: int = 200
    sgd_n_mult: float = 1e-3
    smoothness_scale: float = 1.0


@dataclass(frozen=True)
class BenchConfig:
    sizes: tuple[tuple[int, int], ...] = ((10, 3), (50, 3), (100, 3))
    repeats: int = 3
    grad_evals: int = 200
    agd_iters: int = 200
    sgd_steps: int = 200


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    seed: int = 0
    instance: InstanceConfig = field(default_factory=InstanceConfig)
    regularizer: RegularizerConfig = field(default_factory=RegularizerConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    verify: VerifyConfig = field(default_factory=VerifyConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
    rho_policies: int = 100
    log_wall_time: bool = False
    base_dir: str = "."

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        return d


def _section(cls, raw, where: str, rename: dict | None = None):
    if raw is None:
        return cls()
    if not isinstance(raw, dict):
        raise ConfigError(f"{where} must be an object")
    raw = dict(raw)
    for src, dst in (rename or {}).items():
        if src in raw:
            raw[dst] = raw.pop(src)
    names = {f.name for f in fields(cls)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad {where}: {exc}") from exc


def parse_config(raw: dict, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    allowed = {"name", "seed", "instance", "regularizer", "solver", "verify", "bench", "rho",
               "log_wall_time"}
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    reg_raw = dict(raw.get("regularizer") or {})
    q = reg_raw.pop("q", None) or {}
    if not isinstance(q, dict):
        raise ConfigError("regularizer.q must be an object")
    reg_raw["q_mode"] = q.get("mode", "uniform")
    reg_raw["q_floor"] = q.get("floor")
    verify_raw = dict(raw.get("verify") or {})
    for key in ("rate_T", "alphas"):
        if verify_raw.get(key) is not None:
            verify_raw[key] = tuple(verify_raw[key])
    bench_raw = dict(raw.get("bench") or {})
    if "sizes" in bench_raw:
        bench_raw["sizes"] = tuple(tuple(s) for s in bench_raw["sizes"])
    rho = raw.get("rho") or {}
    cfg = ExperimentConfig(
        name=str(raw.get("name", "experiment")),
        seed=raw.get("seed", 0),
        instance=_section(InstanceConfig, raw.get("instance"), "instance"),
        regularizer=_section(RegularizerConfig, reg_raw, "regularizer"),
        solver=_section(SolverConfig, raw.get("solver"), "solver"),
        verify=_section(VerifyConfig, verify_raw, "verify"),
        bench=_section(BenchConfig, bench_raw, "bench"),
        rho_policies=int(rho.get("n_policies", 100)),
        log_wall_time=bool(raw.get("log_wall_time", False)),
        base_dir=str(base_dir),
    )
    check_config(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config(io.read_json(path), base_dir=str(path.parent))


def check_config(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(isinstance(cfg.seed, int) and 0 <= cfg.seed < 2**64, "seed must be an unsigned 64-bit integer")
    inst = cfg.instance
    if inst.path is None:
        need(inst.n_states >= 1 and inst.n_actions >= 1, "instance sizes must be positive")
        need(1 <= inst.branching <= inst.n_states, "instance.branching must lie in [1, n_states]")
        need(0.0 < inst.discount < 1.0, "instance.discount must lie in (0, 1)")
    reg = cfg.regularizer
    need(reg.kind in ("kl", "tsallis"), f"regularizer.kind must be 'kl' or 'tsallis', got {reg.kind!r}")
    given = [x is not None for x in (reg.eta, reg.epsilon, reg.eta_beta_multiple)]
    need(sum(given) == 1, "regularizer needs exactly one of eta, epsilon, eta_beta_multiple")
    for name in ("eta", "epsilon", "eta_beta_multiple"):
        val = getattr(reg, name)
        need(val is None or val > 0, f"regularizer.{name} must be positive")
    need(reg.variant in ("statement", "proof"), "regularizer.variant must be 'statement' or 'proof'")
    if reg.kind == "tsallis":
        need(reg.alpha is not None and 1.0 < reg.alpha <= 2.0, "Tsallis regularizer needs alpha in (1, 2]")
    need(reg.q_mode in ("uniform", "behavior"), "regularizer.q.mode must be 'uniform' or 'behavior'")
    if reg.q_mode == "behavior":
        need(reg.q_floor is not None and reg.q_floor > 0, "behavior reference needs a positive floor")
    sol = cfg.solver
    need(sol.method in ("agd", "sgd"), f"solver.method must be 'agd' or 'sgd', got {sol.method!r}")
    need(sol.max_iters >= 1 and sol.total_steps >= 1, "iteration budgets must be positive")
    need(sol.grad_tol_l1 >= 0, "solver.grad_tol_l1 must be nonnegative")
    need(sol.record_every >= 1, "solver.record_every must be positive")
    need(sol.radius is None or sol.radius > 0, "solver.radius must be positive")
    need(sol.smoothness_scale > 0, "solver.smoothness_scale must be positive")
    need(0 < sol.delta < 1, "solver.delta must lie in (0, 1)")
    need(min(sol.xi_mult, sol.tau_mult, sol.n_mult) > 0, "schedule multipliers must be positive")
    if sol.method == "sgd":
        need(reg.kind == "kl", "the stochastic solver supports the KL regularizer only")
    ver = cfg.verify
    need(ver.n_instances >= 1 and ver.n_pairs >= 1 and ver.n_vtilde >= 1, "verify counts must be positive")
    need(all(t >= 1 for t in ver.rate_T), "verify.rate_T entries must be positive")
    need(ver.smoothness_scale > 0, "verify.smoothness_scale must be positive")
    if ver.alphas is not None:
        need(all(1.0 < a <= 2.0 for a in ver.alphas), "verify.alphas must lie in (1, 2]")
    need(cfg.rho_policies >= 1, "rho.n_policies must be positive")
    need(cfg.bench.repeats >= 1, "bench.repeats must be positive")


def with_seed(cfg: ExperimentConfig, seed: int | None) -> ExperimentConfig:
    if seed is None:
        return cfg
    cfg = replace(cfg, seed=int(seed))
    check_config(cfg)
    return cfg


def instance_seed(cfg: ExperimentConfig) -> int:
    if cfg.instance.seed is not None:
        return int(cfg.instance.seed)
    return int(stream(cfg.seed, "instance").integers(2**62))


def build_mdp(cfg: ExperimentConfig, offset: int = 0) -> Mdp:
    inst = cfg.instance
    if inst.path is not None:
        m = io.load_mdp(Path(cfg.base_dir) / inst.path)
    else:
        m = random_mdp(instance_seed(cfg) + offset, inst.n_states, inst.n_actions, inst.branching,
                       inst.discount)
    validate_mdp(m)
    return m


def build_problem(cfg: ExperimentConfig, m: Mdp, alpha: float | None = None) -> RegularizedProblem:
    reg = cfg.regularizer
    if reg.q_mode == "uniform":
        ref = uniform_reference(m)
    else:
        ref = behavior_reference(m, uniform_policy(m), reg.q_floor)
    alpha = alpha if alpha is not None else reg.alpha

    def make(eta):
        if reg.kind == "kl":
            return RegularizedProblem(m, KlSpec(eta, ref))
        return RegularizedProblem(m, TsallisSpec(eta, alpha, ref))

    if reg.eta is not None:
        return make(reg.eta)
    if reg.eta_beta_multiple is not None:
        return make(reg.eta_beta_multiple / ref.beta)
    return make(eta_for_accuracy(reg.epsilon, make(1.0), reg.variant))


def measured_floor(cfg: ExperimentConfig, m: Mdp, offset: int = 0) -> float:
    return visitation_floor(m, cfg.rho_policies, stream(cfg.seed, "rho", offset))


def radius_for(cfg: ExperimentConfig, p: RegularizedProblem, rho: float) -> float:
    if cfg.solver.radius is not None:
        return float(cfg.solver.radius)
    return theory_constants(p, rho).radius


@dataclass
class SolveResult:
    v: np.ndarray
    policy: np.ndarray
    log: IterateLog
    summary: dict[str, Any]
    mdp: Mdp
    reports: list[GapReport] = field(default_factory=list)


def _summary_core(cfg, p, v, rho, radius, alpha):
    m = p.mdp
    g = dual_gradient(p, v)
    lam = candidate_primal(p, v)
    policy = policy_from_visitation(lam)
    oracle = value_iteration(m, tol=1e-12)
    core = {
        "name": cfg.name,
        "config_hash": io.content_hash(cfg.as_dict()),
        "master_seed": cfg.seed,
        "instance_seed": None if cfg.instance.path else instance_seed(cfg),
        "method": cfg.solver.method,
        "regularizer": p.spec.kind,
        "eta": p.eta,
        "alpha": getattr(p.spec, "alpha", None),
        "beta": p.beta,
        "rho": rho,
        "rho_exact": floor_is_exact(m),
        "radius": radius,
        "smoothness": alpha,
        "jd": dual_value(p, v),
        "grad_l1": float(np.abs(g).sum()),
        "grad_l2": float(np.sqrt(g @ g)),
        "grad_linf": float(np.abs(g).max()),
        "jp_candidate": primal_regularized_value(p, lam),
        "candidate_flow_residual_l1": float(np.abs(flow_residual(m, lam)).sum()),
        "jp_policy": primal_regularized_value(p, visitation_of_policy(m, policy)),
        "suboptimality": policy_suboptimality(m, policy, oracle),
        "epsilon": cfg.regularizer.epsilon,
    }
    return core, policy


def run_solve(cfg: ExperimentConfig) -> SolveResult:
    m = build_mdp(cfg)
    p = build_problem(cfg, m)
    rho = measured_floor(cfg, m)
    radius = radius_for(cfg, p, rho)
    alpha = smoothness_constant(p) * cfg.solver.smoothness_scale
    sol = cfg.solver
    if sol.method == "agd":
        v, log = accelerated_solve(p, AgdConfig(sol.max_iters, radius, sol.grad_tol_l1, sol.record_every,
                                                alpha, cfg.log_wall_time))
        iterations = int(log.rows[-1][0])
    else:
        scfg = SgdConfig(sol.total_steps, sol.delta, radius, sol.xi_mult, sol.tau_mult, sol.n_mult,
                         sol.record_every, cfg.log_wall_time)
        v, log = sgd_solve(p, scfg, seed_sequence(cfg.seed, "sgd"))
        iterations = sol.total_steps
    summary, policy = _summary_core(cfg, p, v, rho, radius, alpha)
    summary["iterations"] = iterations
    summary["converged"] = bool(summary["grad_l1"] <= sol.grad_tol_l1) if sol.method == "agd" else None
    if sol.method == "sgd":
        summary["cum_samples"] = int(log.rows[-1][log.columns.index("cum_samples")])
        summary["sgd_meta"] = dict(log.meta)
    reports = []
    if sol.method == "agd":
        reports.append(GapReport("gradient_tolerance", summary["grad_l1"], sol.grad_tol_l1, 0.0,
                                 {"iterations": iterations}))
    if cfg.regularizer.epsilon is not None:
        reports.append(GapReport("policy_suboptimality", summary["suboptimality"],
                                 cfg.regularizer.epsilon, 0.0, {"eta": p.eta}))
    if sol.method == "sgd":
        reports.append(dispersion_check(log))
        reports.append(GapReport("iterates_in_ball", log.meta["max_abs_v"], radius, 0.0, {}))
    return SolveResult(v, policy, log, summary, m, reports)


def write_solve_outputs(res: SolveResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_log_csv(out / "iterates.csv", res.log)
    io.write_json(out / "policy.json", {"n_states": res.mdp.n_states, "n_actions": res.mdp.n_actions,
                                        "policy": res.policy})
    io.save_mdp(out / "instance.json", res.mdp)
    summary = dict(res.summary, checks=[r.as_record() for r in res.reports])
    io.write_json(out / "summary.json", summary)


def _random_in_ball(rng, n, radius, size):
    return rng.uniform(-radius, radius, size=(size, n))


def _smoothness_pairs(rng, p, v_ref, radius, count):
    """Half the pairs sit near the optimum, half anywhere in the ball; steps are short sign vectors."""
    n = p.mdp.n_states
    pairs = []
    for k in range(count):
        if k % 2:
            w = rng.uniform(-radius, radius, size=n)
        else:
            w = np.clip(v_ref + rng.normal(scale=0.5 / p.eta, size=n), -radius, radius)
        r = 10.0 ** rng.uniform(-3.0, 0.0) / p.eta
        d = r * rng.choice([-1.0, 1.0], size=n)
        pairs.append((w + d, w))
    return pairs


def _policies(rng, m, count):
    return [rng.dirichlet(np.ones(m.n_actions), size=m.n_states) for _ in range(count)]


def verify_instance(cfg: ExperimentConfig, offset: int, alpha_t: float | None = None) -> list[GapReport]:
    """All checks on one instance; every report carries the instance offset in its context."""
    ver = cfg.verify
    m = build_mdp(cfg, offset)
    p = build_problem(cfg, m, alpha_t)
    rho = measured_floor(cfg, m, offset)
    radius = radius_for(cfg, p, rho)
    rng = stream(cfg.seed, "verify", offset)
    smooth = smoothness_constant(p) * ver.smoothness_scale
    norm = "linf" if p.spec.kind == "kl" else "l2"
    ctx = {"instance": offset, "regularizer": p.spec.kind, "alpha": getattr(p.spec, "alpha", None)}
    reports: list[GapReport] = []

    def add(r: GapReport):
        reports.append(GapReport(r.check, r.gap, r.bound, r.slack, {**r.context, **ctx}))

    v0 = rng.normal(size=m.n_states)
    g, fd = dual_gradient(p, v0), finite_difference_gradient(p, v0, 1e-5)
    scale = max(float(np.abs(g).max()), 1e-12)
    add(GapReport("gradient_finite_difference", float(np.abs(g - fd).max()) / scale, 1e-6, 0.0, {}))

    vs = _random_in_ball(rng, m.n_states, radius, ver.n_pairs)
    add(weak_duality_check(p, vs, _policies(rng, m, ver.n_pairs)))

    ref = reference_solve(p)
    add(GapReport("reference_gradient", ref.grad_l1, 1e-10, 0.0, {"agd_iters": ref.agd_iters}))
    if m.n_states >= 2:
        tildes = [np.zeros(m.n_states), ref.v] + list(_random_in_ball(rng, m.n_states, radius, ver.n_vtilde))
        worst = max((policy_value_bound_check(p, vt, rho, ref.v) for vt in tildes), key=lambda r: r.gap - r.bound)
        add(worst)

    add(smoothness_envelope_check(p, _smoothness_pairs(rng, p, ref.v, radius, ver.n_pairs), smooth, norm))

    T_max = max(ver.rate_T)
    y, log = accelerated_solve(p, AgdConfig(T_max, radius, 0.0, 1, smooth))
    x_star = closest_minimizer(ref.v, radius)
    dist = float(x_star @ x_star)
    for T in ver.rate_T:
        y_T, _ = accelerated_solve(p, AgdConfig(T, radius, 0.0, T, smooth))
        add(rate_envelope_check(p, y_T, T, ref.value, dist, smooth))
    add(gradient_certificate_check(log, ref.value, smooth, "grad_l1" if norm == "linf" else "grad_l2"))

    if p.spec.kind == "kl":
        scfg = SgdConfig(ver.sgd_steps, 0.1, radius, n_mult=ver.sgd_n_mult, record_every=ver.sgd_steps)
        _, slog = sgd_solve(p, scfg, seed_sequence(cfg.seed, "sgd", offset))
        add(dispersion_check(slog))
        add(GapReport("iterates_in_ball", slog.meta["max_abs_v"], radius, 0.0, {}))
    return reports


def thread_count() -> int:
    raw = os.environ.get("REPS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"REPS_THREADS must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError("REPS_THREADS must be at least 1")
    return n


def run_verify(cfg: ExperimentConfig) -> list[GapReport]:
    ver = cfg.verify
    alphas = ver.alphas if (cfg.regularizer.kind == "tsallis" and ver.alphas) else (None,)
    jobs = [(offset, a) for a in alphas for offset in range(ver.n_instances)]
    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        results = list(pool.map(lambda job: verify_instance(cfg, *job), jobs))
    return [r for group in results for r in group]


def write_verify_outputs(reports: list[GapReport], cfg: ExperimentConfig, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_jsonl(out / "reports.jsonl", [r.as_record() for r in reports])
    failed = [r for r in reports if not r.passed]
    io.write_json(out / "verify_summary.json", {
        "name": cfg.name,
        "config_hash": io.content_hash(cfg.as_dict()),
        "n_reports": len(reports),
        "n_failed": len(failed),
        "failed_checks": sorted({r.check for r in failed}),
    })


def run_bench(cfg: ExperimentConfig) -> list[dict]:
    """Throughput of gradient evaluations, AGD iterations and SGD steps per instance size."""
    b = cfg.bench
    rows = []
    for k, (S, A) in enumerate(b.sizes):
        m = random_mdp(instance_seed(cfg) + k, S, A, S, cfg.instance.discount)
        bench_cfg = replace(cfg, regularizer=replace(cfg.regularizer, kind="kl", alpha=None))
        p = build_problem(bench_cfg, m)
        radius = theory_constants(p, visitation_floor(m, 10, 0)).radius
        v = np.zeros(S)
        timings = {"grad": [], "agd": [], "sgd": []}
        for _ in range(b.repeats):
            t0 = time.perf_counter()
            for _ in range(b.grad_evals):
                dual_gradient(p, v)
            timings["grad"].append(b.grad_evals / (time.perf_counter() - t0))
            t0 = time.perf_counter()
            accelerated_solve(p, AgdConfig(b.agd_iters, radius, 0.0, b.agd_iters))
            timings["agd"].append(b.agd_iters / (time.perf_counter() - t0))
            t0 = time.perf_counter()
            sgd_solve(p, SgdConfig(b.sgd_steps, 0.1, radius, n_mult=1e-3, record_every=b.sgd_steps), 0)
            timings["sgd"].append(b.sgd_steps / (time.perf_counter() - t0))
        row = {"n_states": S, "n_actions": A}
        for key, vals in timings.items():
            vals = np.array(vals)
            row[f"{key}_per_s"] = float(vals.mean())
            row[f"{key}_cv"] = float(vals.std() / vals.mean()) if len(vals) > 1 else 0.0
        rows.append(row)
    return rows


def bench_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    header = list(rows[0])
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[h]) if isinstance(row[h], int) else "%.6g" % row[h] for h in header))
    return "\n".join(lines) + "\n"
