import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klrl.objectives import reshaped_reward_values
from klrl.oracle import (
    elbo,
    empirical_distribution,
    entropy,
    expected_reward,
    gibbs_posterior,
    kl,
    klrl_objective_exact,
    partition_function,
    verify_identities,
)
from klrl.policy import TabularPolicy, from_distribution, init_prior
from klrl.reward import OptimalityModel
from klrl.seqspace import make_space

from conftest import random_policy

LN3 = math.log(3.0)


@pytest.fixture
def two_seq():
    s = make_space(["a", "<eos>"], "<eos>", 1)
    return s, TabularPolicy(s), np.array([LN3, 0.0])


def test_zero_reward(prior, space):
    assert partition_function(prior, np.zeros(space.size), 1.0) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(gibbs_posterior(prior, np.zeros(space.size)).probs,
                               prior.distribution(), atol=1e-15)


def test_two_sequence_instance(two_seq):
    s, prior, r = two_seq
    assert math.exp(partition_function(prior, r, 1.0)) == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(gibbs_posterior(prior, r, 1.0).probs, [0.75, 0.25], atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(0.05, 20))
def test_shift_changes_log_z_by_c_over_beta(seed, c, beta):
    s = make_space(["a", "b", "<eos>"], "<eos>", 3)
    rng = np.random.default_rng(seed)
    prior = random_policy(s, rng)
    r = rng.normal(size=s.size)
    a = gibbs_posterior(prior, r, beta)
    b = gibbs_posterior(prior, r + c, beta)
    assert b.log_Z - a.log_Z == pytest.approx(c / beta, abs=1e-12)
    np.testing.assert_allclose(a.probs, b.probs, atol=1e-12)


def test_constant_reward_posterior_is_prior(prior, space):
    np.testing.assert_allclose(gibbs_posterior(prior, np.full(space.size, 3.7), 0.5).probs,
                               prior.distribution(), atol=1e-12)


def test_tempering_limit(prior, reward_values):
    assert kl(gibbs_posterior(prior, reward_values, 1e6).probs, prior.distribution()) < 1e-9


def test_posterior_normalized(prior, reward_values):
    for beta in (0.01, 0.1, 1, 10):
        t = gibbs_posterior(prior, reward_values, beta)
        assert abs(t.probs.sum() - 1) < 1e-10
        # ∝ prior * exp(r / beta)
        ratio = t.probs / (prior.distribution() * np.exp(reward_values / beta))
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-12)


def test_beta_must_be_positive(prior, reward_values):
    with pytest.raises(ValueError):
        gibbs_posterior(prior, reward_values, 0.0)


def test_kl_values():
    p = np.random.default_rng(0).dirichlet(np.ones(10))
    assert kl(p, p) == 0.0
    assert kl([0.75, 0.25], [0.5, 0.5]) == pytest.approx(0.75 * math.log(1.5) + 0.25 * math.log(0.5), abs=1e-15)
    assert kl([0.75, 0.25], [0.5, 0.5]) == pytest.approx(0.130812, abs=1e-6)
    assert kl([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
    assert kl([0.5, 0.5], [1.0, 0.0]) == math.inf
    with pytest.raises(ValueError):
        kl([1.0], [0.5, 0.5])


def test_expected_reward():
    assert expected_reward([0, 1, 0], [3.0, 5.0, 7.0]) == 5.0
    assert expected_reward([0.5, 0.5], [1.0, 0.0]) == 0.5


def test_expected_reward_monte_carlo(space, reward_values):
    p = random_policy(space, np.random.default_rng(1))
    n = 10**5
    samples = reward_values[p.sample_indices(np.random.default_rng(2), n)]
    se = samples.std(ddof=1) / math.sqrt(n)
    assert abs(samples.mean() - expected_reward(p, reward_values)) < 4 * se


def test_entropy():
    assert entropy([1.0, 0.0]) == 0.0
    assert entropy(np.full(15, 1 / 15)) == pytest.approx(math.log(15), abs=1e-14)


def test_klrl_objective_special_cases(prior, reward_values, space):
    assert klrl_objective_exact(prior, prior, reward_values, 1.0) == pytest.approx(
        expected_reward(prior, reward_values), abs=1e-15)
    p = random_policy(space, np.random.default_rng(3))
    assert klrl_objective_exact(p, prior, reward_values, 0.0) == expected_reward(p, reward_values)


def test_klrl_objective_equals_reshaped_expectation(space, prior, reward_values):
    rng = np.random.default_rng(4)
    for _ in range(100):
        p = random_policy(space, rng, 2.0)
        beta = rng.uniform(0.01, 10)
        rp = reshaped_reward_values(p, prior, reward_values, beta)
        assert abs(np.dot(p.distribution(), rp) - klrl_objective_exact(p, prior, reward_values, beta)) < 1e-10


def test_elbo_equality_at_posterior(space, prior, reward_values):
    m = OptimalityModel(reward_values, space)
    post = gibbs_posterior(prior, m, 1.0)
    assert elbo(from_distribution(space, post.probs), prior, m) == pytest.approx(post.log_Z, abs=1e-9)


def test_elbo_bound_and_gap(space, prior, reward_values):
    m = OptimalityModel(reward_values, space)
    post = gibbs_posterior(prior, m, 1.0)
    rng = np.random.default_rng(5)
    for _ in range(1000):
        p = random_policy(space, rng, 3.0)
        e = elbo(p, prior, m)
        assert e <= post.log_Z
        assert post.log_Z - e == pytest.approx(kl(p, post.probs), abs=1e-8)
        assert e == pytest.approx(klrl_objective_exact(p, prior, m, 1.0), abs=1e-10)


def test_elbo_drops_zero_mass_terms(space, prior, reward_values):
    delta = np.zeros(space.size)
    delta[4] = 1.0
    p = from_distribution(space, delta)
    m = OptimalityModel(reward_values, space)
    assert np.isfinite(elbo(p, prior, m))


def test_verify_identities_random(space, prior, reward_values):
    rng = np.random.default_rng(6)
    for beta in (0.1, 1.0, 10.0):
        for _ in range(20):
            rep = verify_identities(random_policy(space, rng, 2.0), prior, reward_values, beta)
            assert rep.residual_eq7 < 1e-8
            assert rep.residual_eq3_eq4 < 1e-8
            assert rep.elbo_gap_violation == 0.0


def test_verify_identities_at_optimum(space, prior, reward_values):
    beta = 0.7
    t = gibbs_posterior(prior, reward_values, beta)
    opt = from_distribution(space, t.probs)
    assert kl(opt, t.probs) < 1e-12
    assert klrl_objective_exact(opt, prior, reward_values, beta) == pytest.approx(beta * t.log_Z, abs=1e-9)
    m = OptimalityModel(reward_values, space)
    opt1 = from_distribution(space, gibbs_posterior(prior, reward_values, 1.0).probs)
    rep = verify_identities(opt1, prior, reward_values, 1.0)
    assert rep.elbo_gap_violation <= 1e-9
    assert abs(elbo(opt1, prior, m) - gibbs_posterior(prior, m, 1.0).log_Z) < 1e-9


def test_verify_identities_detects_corruption(space, prior, reward_values):
    rep = verify_identities(prior, prior, reward_values, 1.0, log_z_offset=0.1)
    assert rep.residual_eq7 == pytest.approx(0.1, abs=1e-12)


def test_optimality_of_posterior(space, prior, reward_values):
    beta = 1.0
    t = gibbs_posterior(prior, reward_values, beta)
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        p = random_policy(space, rng, rng.uniform(0.1, 3))
        J = klrl_objective_exact(p, prior, reward_values, beta)
        assert J <= beta * t.log_Z + 1e-12
        if abs(J - beta * t.log_Z) < 1e-6:
            assert kl(p, t.probs) < 1e-4


def test_tempering_monotone(prior, reward_values):
    p0 = prior.distribution()
    rows = [gibbs_posterior(prior, reward_values, b) for b in (0.1, 0.3, 1, 3, 10)]
    er = [expected_reward(t.probs, reward_values) for t in rows]
    kls = [kl(t.probs, p0) for t in rows]
    assert all(a >= b for a, b in zip(er, er[1:]))
    assert all(a >= b for a, b in zip(kls, kls[1:]))


def test_empirical_distribution(space):
    t = empirical_distribution(space, [4, 4, 1, 0])
    assert t.probs[4] == 0.5 and t.probs[1] == 0.25 and t.probs.sum() == 1.0
    with pytest.raises(ValueError):
        empirical_distribution(space, [])
