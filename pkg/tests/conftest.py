import numpy as np
import pytest

from reps import KlSpec, Mdp, RegularizedProblem, TsallisSpec, random_mdp, uniform_reference
from reps.mdp import behavior_reference, uniform_policy


def one_state(reward=0.5, discount=0.9):
    return Mdp([[[1.0]]], [[reward]], [1.0], discount)


def two_state_cycle(discount=0.5):
    """Two states that swap deterministically; one action; starts in state 0."""
    P = np.array([[[0.0, 1.0]], [[1.0, 0.0]]])
    return Mdp(P, np.zeros((2, 1)), [1.0, 0.0], discount)


def deterministic_mdp(seed, S, A, discount=0.9):
    rng = np.random.default_rng(seed)
    P = np.zeros((S, A, S))
    nxt = rng.integers(S, size=(S, A))
    P[np.arange(S)[:, None], np.arange(A)[None, :], nxt] = 1.0
    return Mdp(P, rng.uniform(size=(S, A)), np.full(S, 1.0 / S), discount)


def kl_problem(m, eta=1.0, floor=None):
    q = uniform_reference(m) if floor is None else behavior_reference(m, uniform_policy(m), floor)
    return RegularizedProblem(m, KlSpec(eta, q))


def tsallis_problem(m, eta=2.0, alpha=1.5, floor=None):
    q = uniform_reference(m) if floor is None else behavior_reference(m, uniform_policy(m), floor)
    return RegularizedProblem(m, TsallisSpec(eta, alpha, q))


def make_problem(kind, m, **kw):
    return kl_problem(m, **kw) if kind == "kl" else tsallis_problem(m, **kw)


@pytest.fixture
def mdp_5x3():
    return random_mdp(3, 5, 3, 3, 0.9)


@pytest.fixture
def mdp_3x2():
    return random_mdp(0, 3, 2, 2, 0.9)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request, capsys):
    """Print and record one ``PASS``/``FAIL`` line for an acceptance criterion."""

    def emit(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2} {title}: {detail}"
        request.config.stash.setdefault(ACCEPTANCE_LINES, []).append((number, line))
        with capsys.disabled():
            print("\n" + line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
