import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import kl_problem, make_problem, one_state
from reps import KlSpec, ReferenceDistribution, RegularizedProblem, TsallisSpec, random_mdp
from reps.agd import (
    AgdConfig,
    accelerated_solve,
    closest_minimizer,
    eta_for_accuracy,
    iterations_from_constants,
    project_linf,
    reference_solve,
    required_iterations,
    suboptimality_certificate,
)
from reps.diagnostics import certified_gap, visitation_floor
from reps.dual import dual_radius, dual_value, smoothness_constant
from reps.errors import InvalidInput

# Minimum of J_D on random_mdp(3, 5, 3, 3, 0.9) with uniform q, found by
# Nelder-Mead followed by BFGS with numerical gradients (scipy.optimize).
KL_OPTIMUM = 1.4685511171538541  # eta = 1
TSALLIS_OPTIMUM = 0.4831290882498934  # eta = 2, alpha = 1.5


class TestProjection:
    def test_clip(self):
        np.testing.assert_array_equal(project_linf([3.0, -0.5], 1.0), [1.0, -0.5])

    def test_inside_unchanged(self):
        v = np.array([0.2, -0.9, 0.0])
        np.testing.assert_array_equal(project_linf(v, 1.0), v)

    def test_bad_radius(self):
        with pytest.raises(InvalidInput):
            project_linf([1.0], 0.0)

    @settings(max_examples=50, deadline=None)
    @given(v=arrays(np.float64, 4, elements=st.floats(-10, 10)), radius=st.floats(0.1, 5))
    def test_euclidean_projection(self, v, radius):
        x = project_linf(v, radius)
        assert np.abs(x).max() <= radius
        np.testing.assert_array_equal(project_linf(x, radius), x)
        best = np.sum((x - v) ** 2)
        steps = np.linspace(-0.5, 0.5, 11)
        for i in range(4):
            for h in steps:
                y = x.copy()
                y[i] = np.clip(y[i] + h, -radius, radius)
                assert np.sum((y - v) ** 2) >= best - 1e-12


class TestAcceleratedSolve:
    def test_one_state_stops_immediately(self):
        p = kl_problem(one_state())
        y, log = accelerated_solve(p, AgdConfig(max_iters=100, radius=10.0, grad_tol_l1=1e-12))
        assert len(log) == 1 and log.rows[0][0] == 0 and log.rows[0][2] == 0.0

    @pytest.mark.parametrize("T", [10, 100, 1000])
    def test_rate_envelope(self, T, mdp_5x3):
        p = kl_problem(mdp_5x3)
        rho = visitation_floor(mdp_5x3, 100, np.random.default_rng(0))
        radius = dual_radius(p, rho)
        ref = reference_solve(p)
        v_star = closest_minimizer(ref.v, radius)
        y, _ = accelerated_solve(p, AgdConfig(max_iters=T, radius=radius))
        bound = 4 * smoothness_constant(p) * np.sum(v_star**2) / T**2
        assert dual_value(p, y) - ref.value <= bound + 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_increases_stay_below_envelope(self, seed):
        m = random_mdp(seed, 5, 3, 3, 0.9)
        p = kl_problem(m)
        radius = dual_radius(p, visitation_floor(m, 100, np.random.default_rng(seed)))
        ref = reference_solve(p)
        d2 = np.sum(closest_minimizer(ref.v, radius) ** 2)
        _, log = accelerated_solve(p, AgdConfig(max_iters=500, radius=radius))
        jd, t = log.column("jd"), log.column("t")
        rise = np.diff(jd)[5:]
        envelope = 4 * smoothness_constant(p) * d2 / t[6:] ** 2
        assert np.all(rise <= envelope + 1e-9)

    def test_iterates_in_ball(self, mdp_5x3):
        p = kl_problem(mdp_5x3, eta=5.0)
        _, log = accelerated_solve(p, AgdConfig(max_iters=300, radius=0.5))
        assert log.column("v_linf").max() <= 0.5

    def test_deterministic(self, mdp_5x3):
        p = make_problem("tsallis", mdp_5x3)
        cfg = AgdConfig(max_iters=200, radius=50.0, record_every=7)
        y1, l1 = accelerated_solve(p, cfg)
        y2, l2 = accelerated_solve(p, cfg)
        assert np.array_equal(y1, y2) and l1.rows == l2.rows

    def test_log_indices_increase(self, mdp_5x3):
        _, log = accelerated_solve(kl_problem(mdp_5x3), AgdConfig(max_iters=95, radius=50.0, record_every=10))
        t = log.column("t")
        assert np.all(np.diff(t) > 0) and t[-1] == 95

    def test_early_stop(self, mdp_5x3):
        _, log = accelerated_solve(kl_problem(mdp_5x3), AgdConfig(max_iters=100_000, radius=100.0, grad_tol_l1=1e-6))
        assert log.column("grad_l1")[-1] <= 1e-6 and log.rows[-1][0] < 100_000

    def test_untimed_logs_zero_ns(self, mdp_3x2):
        _, log = accelerated_solve(kl_problem(mdp_3x2), AgdConfig(max_iters=20, radius=10.0))
        assert np.all(log.column("ns") == 0)


class TestReferenceSolve:
    @pytest.mark.parametrize("kind, expected", [("kl", KL_OPTIMUM), ("tsallis", TSALLIS_OPTIMUM)])
    def test_matches_derivative_free_optimum(self, kind, expected, mdp_5x3):
        ref = reference_solve(make_problem(kind, mdp_5x3))
        assert ref.grad_l1 <= 1e-10
        assert ref.value == pytest.approx(expected, abs=1e-12)

    def test_closest_minimizer(self):
        v = np.array([1.0, 2.0, 6.0])
        np.testing.assert_allclose(closest_minimizer(v), [-2.0, -1.0, 3.0])
        np.testing.assert_allclose(closest_minimizer(v, radius=2.5), [-2.5, -1.5, 2.5])
        with pytest.raises(InvalidInput):
            closest_minimizer(v, radius=1.0)


def _kl_with_beta(beta, S=5, A=2, eta=1.0):
    m = random_mdp(0, S, A, 2, 0.9)
    n = S * A
    q = np.full(n, beta)
    q[0] = 1.0 - (n - 1) * beta
    return RegularizedProblem(m, KlSpec(eta, ReferenceDistribution(q.reshape(S, A), q.min())))


def _tsallis_with_beta(beta, alpha=2.0, S=5, A=2):
    p = _kl_with_beta(beta, S, A)
    return RegularizedProblem(p.mdp, TsallisSpec(1.0, alpha, p.spec.reference))


class TestEtaForAccuracy:
    def test_kl_statement(self):
        assert eta_for_accuracy(0.1, _kl_with_beta(0.1)) == pytest.approx(1 / (0.2 * math.log(100)), rel=1e-14)
        assert eta_for_accuracy(0.1, _kl_with_beta(0.1)) == pytest.approx(1.0857, abs=1e-4)

    def test_kl_proof_variant(self):
        p = _kl_with_beta(0.1)
        assert eta_for_accuracy(0.1, p, "proof") == pytest.approx(0.5 * eta_for_accuracy(0.1, p), rel=1e-14)
        with pytest.raises(InvalidInput):
            eta_for_accuracy(0.1, p, "other")

    def test_tsallis(self):
        assert eta_for_accuracy(0.1, _tsallis_with_beta(0.1)) == pytest.approx(2000.0, rel=1e-12)

    @pytest.mark.parametrize("make", [_kl_with_beta, _tsallis_with_beta])
    def test_decreasing_in_epsilon(self, make):
        p = make(0.05)
        etas = [eta_for_accuracy(e, p) for e in np.geomspace(1e-3, 1.0, 20)]
        assert np.all(np.diff(etas) < 0)

    def test_beta_dependence(self):
        betas = np.linspace(0.01, 0.1, 10)
        kl = [eta_for_accuracy(0.1, _kl_with_beta(b)) for b in betas]
        ts = [eta_for_accuracy(0.1, _tsallis_with_beta(b)) for b in betas]
        assert np.all(np.diff(ts) < 0)
        assert np.all(np.diff(kl) > 0)  # log(|S||A| / beta) shrinks as beta grows

    def test_rejects_nonpositive(self):
        with pytest.raises(InvalidInput):
            eta_for_accuracy(0.0, _kl_with_beta(0.1))


class TestIterationCounts:
    def test_kl_regularized_example(self):
        t = iterations_from_constants(0.1, "regularized", "kl", n_states=3, n_actions=2, discount=0.5,
                                      eta=1.0, c_double_prime=5.0)
        assert t == 62720

    def test_doubling_xi_halves_count(self):
        kw = dict(n_states=4, n_actions=3, discount=0.9, eta=2.0, c_double_prime=7.3)
        for xi in [0.01, 0.1, 0.37]:
            a = iterations_from_constants(xi, "regularized", "kl", **kw)
            b = iterations_from_constants(2 * xi, "regularized", "kl", **kw)
            assert abs(a - 2 * b) <= 1

    @pytest.mark.parametrize("reg", ["kl", "tsallis"])
    def test_unregularized_inverse_square(self, reg):
        kw = dict(n_states=4, n_actions=3, discount=0.9, eta=2.0, c_double_prime=7.3, alpha=1.5, beta=0.05)
        eps = np.geomspace(0.01, 0.5, 8)
        t = np.array([iterations_from_constants(e, "unregularized", reg, **kw) for e in eps])
        np.testing.assert_allclose(t * eps**2, t[0] * eps[0] ** 2, rtol=1e-4)

    def test_required_iterations_uses_constants(self, mdp_5x3):
        p = kl_problem(mdp_5x3, eta=2.0)
        expected = iterations_from_constants(0.1, "regularized", "kl", n_states=5, n_actions=3, discount=0.9,
                                             eta=2.0, c_double_prime=(1 + math.log(15 / (1 / 15**2 * 0.1**4))) / 2)
        assert required_iterations(0.1, p, "regularized", 0.1) == expected

    def test_unknown_kind(self):
        with pytest.raises(InvalidInput):
            iterations_from_constants(0.1, "other", "kl", n_states=3, n_actions=2, discount=0.5,
                                      eta=1.0, c_double_prime=5.0)


class TestCertificate:
    @pytest.mark.parametrize("kind", ["kl", "tsallis"])
    def test_at_reference(self, kind, mdp_5x3):
        p = make_problem(kind, mdp_5x3)
        ref = reference_solve(p)
        assert suboptimality_certificate(p, ref.v, 0.0).passed

    @pytest.mark.parametrize("kind", ["kl", "tsallis"])
    def test_along_agd_path(self, kind, mdp_5x3):
        p = make_problem(kind, mdp_5x3)
        ref = reference_solve(p)
        cfg = AgdConfig(max_iters=1, radius=100.0)
        for T in [1, 3, 10, 30, 100, 300]:
            y, _ = accelerated_solve(p, AgdConfig(max_iters=T, radius=cfg.radius))
            eps = certified_gap(dual_value(p, y), ref.value)
            assert suboptimality_certificate(p, y, eps).passed

    def test_negative_control(self, mdp_5x3):
        p = kl_problem(mdp_5x3)
        rep = suboptimality_certificate(p, np.array([5.0, -5.0, 0.0, 0.0, 0.0]), 1e-12)
        assert not rep.passed and rep.gap > rep.bound
