import numpy as np
import pytest

from klrl.policy import TabularPolicy, init_prior
from klrl.reward import Composite, ContainsSubstring, LengthPenalty
from klrl.seqspace import make_space

# (criterion, passed, detail) rows filled by test_acceptance
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")


@pytest.fixture
def space():
    """a, b, EOS with max_len 3: 15 sequences."""
    return make_space(["a", "b", "<eos>"], "<eos>", 3)


@pytest.fixture
def prior(space):
    return init_prior(space, "gaussian-logits", seed=7, sigma=1.0)


@pytest.fixture
def default_reward():
    return Composite(((1.0, ContainsSubstring("ab", 1.0)), (1.0, LengthPenalty(0.1))))


@pytest.fixture
def reward_values(space, default_reward):
    return default_reward.values(space)


def random_policy(space, rng, sigma=1.0):
    return TabularPolicy(space, sigma * rng.standard_normal(space.logits_shape))


def finite_difference(f, logits, step=1e-6):
    """Central differences of scalar f(logits) w.r.t. every logit."""
    grad = np.zeros_like(logits)
    for idx in np.ndindex(*logits.shape):
        up = logits.copy()
        dn = logits.copy()
        up[idx] += step
        dn[idx] -= step
        grad[idx] = (f(up) - f(dn)) / (2 * step)
    return grad


def rel_error(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12)
