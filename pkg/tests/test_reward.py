import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from klrl.reward import (
    Composite,
    ContainsSubstring,
    LengthPenalty,
    OptimalityModel,
    TableReward,
    TokenCount,
    argmax_set,
    evaluate,
    reward_from_json,
    to_optimality_prob,
)
from klrl.seqspace import make_space


def test_token_count():
    s = make_space(["a", "b", "<eos>"], "<eos>", 3)
    assert evaluate(TokenCount("a", 1.0), s, s.parse("aab")) == 2.0


def test_length_penalty_empty(space):
    assert evaluate(LengthPenalty(0.5), space, ()) == 0.0


def test_composite(space, default_reward):
    assert evaluate(default_reward, space, space.parse("ab")) == pytest.approx(0.8, abs=1e-15)


def test_values_match_evaluate(space, default_reward):
    v = default_reward.values(space)
    assert [default_reward.evaluate(space, x) for x in space] == pytest.approx(v, abs=0)


def test_purity(space, default_reward):
    np.testing.assert_array_equal(default_reward.values(space), default_reward.values(space))


def test_table_reward(space):
    r = reward_from_json({"kind": "table", "entries": [{"seq": "ab", "r": 0.8}], "default": -1.0}, space)
    assert r.evaluate(space, space.parse("ab")) == 0.8
    assert r.evaluate(space, space.parse("b")) == -1.0
    r = reward_from_json({"kind": "table", "entries": [{"seq": "ab", "r": 0.8}]}, space)
    with pytest.raises(KeyError):
        r.evaluate(space, ())
    with pytest.raises(ValueError):
        reward_from_json({"kind": "table", "values": [1.0, 2.0]}, space)


def test_json_round_trip(space, default_reward):
    again = reward_from_json(default_reward.to_json(), space)
    np.testing.assert_array_equal(again.values(space), default_reward.values(space))
    tab = TableReward(tuple(float(i) for i in range(space.size)))
    np.testing.assert_array_equal(reward_from_json(tab.to_json(), space).values(space), np.arange(15.0))


def test_argmax_contains_ab(space):
    brute = {x for x in space if "ab" in space.render(x)}
    assert argmax_set(ContainsSubstring("ab", 1.0), space) == brute
    assert len(brute) == 5


def test_argmax_constant_and_unique(space):
    assert argmax_set(LengthPenalty(0.0), space) == set(space)
    vals = np.zeros(space.size)
    vals[6] = 1.0
    assert argmax_set(TableReward(tuple(vals)), space) == {space.sequence_at(6)}


def test_argmax_groups_float_ties(space):
    vals = np.zeros(space.size)
    vals[2] = 0.3
    vals[5] = 0.1 + 0.2  # 0.30000000000000004
    assert argmax_set(vals, space) == {space.sequence_at(2), space.sequence_at(5)}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-100, 100))
def test_argmax_shift_invariant(seed, c):
    s = make_space(["a", "b", "<eos>"], "<eos>", 3)
    vals = np.round(np.random.default_rng(seed).normal(size=s.size), 3)
    assert argmax_set(vals, s) == argmax_set(vals + c, s)


def test_optimality_model(space, default_reward):
    m = OptimalityModel(default_reward, space)
    assert m.values().max() == 0.0
    assert to_optimality_prob(m, space.parse("ab")) == 1.0
    probs = np.array([m.to_optimality_prob(x) for x in space])
    assert np.all((probs > 0) & (probs <= 1))


def test_optimality_prob_inverse_exp(space):
    vals = np.zeros(space.size)
    vals[3] = -math.log(2)
    m = OptimalityModel(vals, space)
    assert m.to_optimality_prob(space.sequence_at(3)) == pytest.approx(0.5, abs=1e-15)


def test_unknown_kind(space):
    with pytest.raises(ValueError):
        reward_from_json({"kind": "nope"}, space)
    with pytest.raises(ValueError):
        TokenCount("ab").evaluate(space, ())
