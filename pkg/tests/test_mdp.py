import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import deterministic_mdp, one_state, two_state_cycle
from reps import Mdp, random_mdp
from reps.diagnostics import monte_carlo_policy_value, monte_carlo_visitation, value_iteration
from reps.errors import (
    BadBranching,
    BadDiscount,
    BadInitialDistribution,
    FloorTooLarge,
    NegativeMass,
    RewardOutOfRange,
    RowNotStochastic,
    ShapeMismatch,
)
from reps.mdp import (
    behavior_reference,
    flow_residual,
    policy_from_visitation,
    policy_transition,
    policy_value,
    primal_return,
    uniform_policy,
    validate_mdp,
    validate_policy,
    visitation_of_policy,
)


def random_policy(rng, m):
    return rng.dirichlet(np.ones(m.n_actions), size=m.n_states)


class TestValidate:
    def test_one_state_ok(self):
        assert validate_mdp(one_state()) is None

    def test_reward_out_of_range(self):
        with pytest.raises(RewardOutOfRange) as err:
            validate_mdp(Mdp([[[1.0]]], [[1.5]], [1.0], 0.9))
        assert (err.value.s, err.value.a) == (0, 0)

    def test_row_not_stochastic(self):
        with pytest.raises(RowNotStochastic):
            validate_mdp(Mdp([[[0.9]]], [[0.5]], [1.0], 0.9))

    @pytest.mark.parametrize("gamma", [0.0, 1.0, -0.1, 1.5])
    def test_bad_discount(self, gamma):
        with pytest.raises(BadDiscount):
            validate_mdp(Mdp([[[1.0]]], [[0.5]], [1.0], gamma))

    def test_bad_initial(self):
        with pytest.raises(BadInitialDistribution):
            validate_mdp(Mdp([[[1.0]]], [[0.5]], [0.5], 0.9))

    def test_negative_transition_entry(self):
        P = np.array([[[1.2, -0.2]], [[0.0, 1.0]]])
        with pytest.raises(RowNotStochastic):
            validate_mdp(Mdp(P, np.zeros((2, 1)), [0.5, 0.5], 0.9))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            Mdp(np.ones((2, 1, 2)) / 2, np.zeros((2, 2)), [0.5, 0.5], 0.9)

    def test_arrays_are_read_only(self, mdp_3x2):
        with pytest.raises(ValueError):
            mdp_3x2.transition[0, 0, 0] = 1.0


class TestPolicyValue:
    def test_geometric_series(self):
        m = one_state()
        np.testing.assert_allclose(policy_value(m, [[1.0]]), [5.0], rtol=1e-14)

    def test_zero_reward(self, mdp_5x3):
        m = Mdp(mdp_5x3.transition, np.zeros(mdp_5x3.shape), mdp_5x3.initial, 0.9)
        assert np.array_equal(policy_value(m, uniform_policy(m)), np.zeros(5))

    def test_bellman_residual(self, mdp_5x3):
        pi = random_policy(np.random.default_rng(1), mdp_5x3)
        v = policy_value(mdp_5x3, pi)
        r_pi = np.sum(pi * mdp_5x3.reward, axis=1)
        res = r_pi + 0.9 * policy_transition(mdp_5x3, pi) @ v - v
        assert np.abs(res).max() <= 1e-10

    def test_monte_carlo(self):
        m = random_mdp(21, 4, 3, 2, 0.9)
        pi = uniform_policy(m)
        mean, se = monte_carlo_policy_value(m, pi, 250_000, 150, seed=5)
        z = np.abs(mean - policy_value(m, pi)) / se
        assert z.max() < 3.0

    def test_shape_mismatch(self, mdp_3x2):
        with pytest.raises(ShapeMismatch):
            policy_value(mdp_3x2, np.ones((3, 3)) / 3)

    def test_policy_rows_checked(self, mdp_3x2):
        with pytest.raises(ValueError):
            validate_policy(mdp_3x2, np.full((3, 2), 0.6))


class TestVisitation:
    def test_single_pair(self):
        assert np.array_equal(visitation_of_policy(one_state(), [[1.0]]), [[1.0]])

    def test_two_state_cycle(self):
        lam = visitation_of_policy(two_state_cycle(0.5), [[1.0], [1.0]])
        np.testing.assert_allclose(lam[:, 0], [2 / 3, 1 / 3], rtol=1e-14)

    def test_monte_carlo(self, mdp_5x3):
        pi = random_policy(np.random.default_rng(2), mdp_5x3)
        mean, se = monte_carlo_visitation(mdp_5x3, pi, 1_000_000, 150, seed=6)
        z = np.abs(mean - visitation_of_policy(mdp_5x3, pi)) / se
        assert z.max() < 3.0

    def test_product_form(self, mdp_5x3):
        pi = random_policy(np.random.default_rng(3), mdp_5x3)
        lam = visitation_of_policy(mdp_5x3, pi)
        assert abs(lam.sum() - 1.0) <= 1e-10
        np.testing.assert_allclose(lam, lam.sum(axis=1, keepdims=True) * pi, atol=1e-15)


class TestPolicyFromVisitation:
    def test_uniform(self):
        assert np.array_equal(policy_from_visitation(np.full((2, 2), 0.25)), np.full((2, 2), 0.5))

    def test_zero_row_gets_uniform(self):
        pi = policy_from_visitation([[0.7, 0.3], [0.0, 0.0]])
        np.testing.assert_allclose(pi, [[0.7, 0.3], [0.5, 0.5]], rtol=1e-15)

    def test_negative_mass(self):
        with pytest.raises(NegativeMass) as err:
            policy_from_visitation([[0.5, 0.5], [-0.1, 0.1]])
        assert (err.value.s, err.value.a) == (1, 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_round_trip(self, seed):
        m = random_mdp(seed, 4, 3, 2, 0.9)
        pi = random_policy(np.random.default_rng(seed), m)
        np.testing.assert_allclose(policy_from_visitation(visitation_of_policy(m, pi)), pi, atol=1e-9)


class TestFlowResidual:
    def test_single_state(self):
        assert np.array_equal(flow_residual(one_state(), [[1.0]]), [0.0])

    def test_against_loops(self):
        m = random_mdp(4, 4, 3, 2, 0.9)
        lam = np.full((4, 3), 1 / 12)
        expected = np.zeros(4)
        for s in range(4):
            expected[s] = sum(lam[s, a] for a in range(3)) - 0.1 * m.initial[s]
            for s2 in range(4):
                for a in range(3):
                    expected[s] -= 0.9 * m.transition[s2, a, s] * lam[s2, a]
        np.testing.assert_allclose(flow_residual(m, lam), expected, atol=1e-15)

    def test_shape_mismatch(self, mdp_3x2):
        with pytest.raises(ShapeMismatch):
            flow_residual(mdp_3x2, np.ones((2, 2)) / 4)


class TestPrimalReturn:
    def test_unit_reward(self, mdp_3x2):
        m = Mdp(mdp_3x2.transition, np.ones((3, 2)), mdp_3x2.initial, 0.9)
        assert primal_return(np.full((3, 2), 1 / 6), m) == pytest.approx(1.0, abs=1e-15)

    def test_zero_reward(self, mdp_3x2):
        m = Mdp(mdp_3x2.transition, np.zeros((3, 2)), mdp_3x2.initial, 0.9)
        assert primal_return(np.full((3, 2), 1 / 6), m) == 0.0

    def test_normalized_return_identity(self, mdp_5x3):
        pi = value_iteration(mdp_5x3).pi_star
        lhs = primal_return(visitation_of_policy(mdp_5x3, pi), mdp_5x3)
        rhs = 0.1 * mdp_5x3.initial @ policy_value(mdp_5x3, pi)
        assert lhs == pytest.approx(rhs, abs=1e-9)


class TestRandomMdp:
    def test_deterministic(self):
        assert random_mdp(42, 5, 3, 2, 0.9) == random_mdp(42, 5, 3, 2, 0.9)

    def test_dense_rows(self):
        m = random_mdp(1, 4, 2, 4, 0.9)
        assert np.all(m.transition > 0)

    def test_seed7_instance(self):
        m = random_mdp(7, 3, 2, 2, 0.9)
        validate_mdp(m)
        assert np.all((m.transition > 0).sum(axis=2) == 2)
        np.testing.assert_allclose(m.initial, np.full(3, 1 / 3))

    @pytest.mark.parametrize("branching", [0, 4])
    def test_bad_branching(self, branching):
        with pytest.raises(BadBranching):
            random_mdp(0, 3, 2, branching, 0.9)

    def test_rewards_in_unit_interval(self):
        r = random_mdp(9, 6, 4, 3, 0.5).reward
        assert r.min() >= 0 and r.max() <= 1


class TestBehaviorReference:
    def test_symmetric_mdp_gives_uniform(self):
        P = np.full((2, 2, 2), 0.5)
        m = Mdp(P, np.zeros((2, 2)), [0.5, 0.5], 0.9)
        q = behavior_reference(m, uniform_policy(m), 1e-9)
        np.testing.assert_allclose(q.q, np.full((2, 2), 0.25), rtol=1e-12)

    def test_mixture(self):
        m = random_mdp(5, 4, 3, 2, 0.9)
        q = behavior_reference(m, uniform_policy(m), 0.01)
        expected = 0.88 * visitation_of_policy(m, uniform_policy(m)) + 0.01
        np.testing.assert_allclose(q.q, expected, rtol=1e-14)
        assert q.beta == q.q.min()

    @pytest.mark.parametrize("floor", [0.0, 1 / 12, 0.5])
    def test_floor_too_large(self, floor):
        m = random_mdp(5, 4, 3, 2, 0.9)
        with pytest.raises(FloorTooLarge):
            behavior_reference(m, uniform_policy(m), floor)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.01, 0.99))
    def test_sums_to_one_above_floor(self, seed, frac):
        m = random_mdp(seed, 3, 2, 2, 0.8)
        floor = frac / 6
        pi = random_policy(np.random.default_rng(seed), m)
        q = behavior_reference(m, pi, floor)
        assert abs(q.q.sum() - 1.0) <= 1e-12
        assert q.q.min() >= floor - 1e-15


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.05, 0.99))
def test_occupancy_is_feasible(seed, gamma):
    m = random_mdp(seed, 4, 3, 2, gamma)
    pi = random_policy(np.random.default_rng(seed), m)
    lam = visitation_of_policy(m, pi)
    assert np.abs(flow_residual(m, lam)).max() <= 1e-10
    assert primal_return(lam, m) == pytest.approx((1 - gamma) * m.initial @ policy_value(m, pi), abs=1e-9)


def test_deterministic_transitions_have_point_masses():
    m = deterministic_mdp(0, 4, 2)
    validate_mdp(m)
    assert np.all(m.transition.max(axis=2) == 1.0)
    assert math.isclose(m.transition.sum(), 8.0)
