"""Reward functions on sequence spaces.

Rewards are pure, bounded maps from sequences to floats. Every kind can
also produce its full value vector over a space (``values``), which is what
the exact oracles consume.

JSON form::

    {"kind": "token-count", "token": "a", "weight": 1.0}
    {"kind": "contains", "substring": "ab", "bonus": 1.0}
    {"kind": "length-penalty", "c": 0.1}
    {"kind": "table", "values": [...]}
    {"kind": "table", "entries": [{"seq": "ab", "r": 0.8}], "default": 0.0}
    {"kind": "composite", "terms": [{"weight": 1.0, "reward": {...}}, ...]}
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seqspace import Sequence, SequenceSpace

TIE_DECIMALS = 12


class RewardFn:
    def evaluate(self, space: SequenceSpace, x: Sequence) -> float:
        raise NotImplementedError

    def values(self, space: SequenceSpace) -> np.ndarray:
        return np.array([self.evaluate(space, x) for x in space], dtype=np.float64)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class TokenCount(RewardFn):
    token: str
    weight: float = 1.0

    def evaluate(self, space, x):
        t = space.tokenize(self.token)
        if len(t) != 1:
            raise ValueError(f"{self.token!r} is not a single token")
        return self.weight * sum(1 for s in x if s == t[0])

    def to_json(self):
        return {"kind": "token-count", "token": self.token, "weight": self.weight}


@dataclass(frozen=True)
class ContainsSubstring(RewardFn):
    substring: str
    bonus: float = 1.0

    def evaluate(self, space, x):
        pat = space.tokenize(self.substring)
        n = len(pat)
        hit = any(tuple(x[i:i + n]) == pat for i in range(len(x) - n + 1))
        return self.bonus if hit else 0.0

    def to_json(self):
        return {"kind": "contains", "substring": self.substring, "bonus": self.bonus}


@dataclass(frozen=True)
class LengthPenalty(RewardFn):
    c: float

    def evaluate(self, space, x):
        return -self.c * len(x)

    def to_json(self):
        return {"kind": "length-penalty", "c": self.c}


@dataclass(frozen=True)
class TableReward(RewardFn):
    """Explicit per-index values; ``None`` entries fall back to ``default``."""

    table: tuple
    default: float | None = None

    def evaluate(self, space, x):
        i = space.index_of(x)
        v = self.table[i] if i < len(self.table) else None
        if v is None:
            if self.default is None:
                raise KeyError(f"table reward has no value for index {i}")
            return self.default
        return v

    def values(self, space):
        if len(self.table) > space.size:
            raise ValueError(f"table has {len(self.table)} values for a space of {space.size}")
        return super().values(space)

    @classmethod
    def from_entries(cls, space: SequenceSpace, entries, default: float | None = None):
        table = [None] * space.size
        for e in entries:
            table[space.index_of(space.parse(e["seq"]))] = float(e["r"])
        return cls(tuple(table), default)

    def to_json(self):
        out = {"kind": "table", "values": list(self.table)}
        if self.default is not None:
            out["default"] = self.default
        return out


@dataclass(frozen=True)
class Composite(RewardFn):
    terms: tuple  # ((weight, RewardFn), ...)

    def evaluate(self, space, x):
        return sum(w * r.evaluate(space, x) for w, r in self.terms)

    def values(self, space):
        out = np.zeros(space.size)
        for w, r in self.terms:
            out += w * r.values(space)
        return out

    def to_json(self):
        return {
            "kind": "composite",
            "terms": [{"weight": w, "reward": r.to_json()} for w, r in self.terms],
        }


def reward_from_json(obj: dict, space: SequenceSpace) -> RewardFn:
    kind = obj["kind"]
    if kind == "token-count":
        return TokenCount(obj["token"], float(obj.get("weight", 1.0)))
    if kind in ("contains", "contains-substring"):
        return ContainsSubstring(obj["substring"], float(obj.get("bonus", 1.0)))
    if kind == "length-penalty":
        return LengthPenalty(float(obj["c"]))
    if kind == "table":
        default = obj.get("default")
        default = None if default is None else float(default)
        if "values" in obj:
            vals = [None if v is None else float(v) for v in obj["values"]]
            if len(vals) != space.size:
                raise ValueError(f"table reward has {len(vals)} values, space has {space.size}")
            return TableReward(tuple(vals), default)
        if "entries" in obj:
            return TableReward.from_entries(space, obj["entries"], default)
        raise ValueError("table reward needs 'values' or 'entries'")
    if kind == "composite":
        terms = tuple(
            (float(t.get("weight", 1.0)), reward_from_json(t["reward"], space))
            for t in obj["terms"]
        )
        return Composite(terms)
    raise ValueError(f"unknown reward kind {kind!r}")


def as_values(reward, space: SequenceSpace) -> np.ndarray:
    """Reward vector over ``space``; arrays pass through unchanged."""
    if isinstance(reward, (RewardFn, OptimalityModel)):
        v = reward.values(space)
    else:
        v = np.asarray(reward, dtype=np.float64)
        if v.shape != (space.size,):
            raise ValueError(f"reward vector has shape {v.shape}, space has {space.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("rewards must be finite")
    return v


def evaluate(reward: RewardFn, space: SequenceSpace, x: Sequence) -> float:
    return float(reward.evaluate(space, x))


def argmax_indices(values: np.ndarray) -> np.ndarray:
    """Indices attaining the maximum after rounding to 1e-12 (float ties grouped)."""
    r = np.round(np.asarray(values, dtype=np.float64), TIE_DECIMALS)
    return np.flatnonzero(r == r.max())


def argmax_set(reward, space: SequenceSpace) -> set:
    return {space.sequence_at(int(i)) for i in argmax_indices(as_values(reward, space))}


class OptimalityModel:
    """Reward shifted by its maximum so that exp(shifted) is a probability.

    ``prob(x) = p(O=1 | x) = exp(r(x) - max r)`` lies in (0, 1] and equals 1
    on the argmax set.
    """

    def __init__(self, base, space: SequenceSpace):
        self.base = base
        self.space = space
        self._base_values = as_values(base, space)
        self.shift = float(self._base_values.max())

    def values(self, space: SequenceSpace | None = None) -> np.ndarray:
        return self._base_values - self.shift

    def shifted(self, x: Sequence) -> float:
        return float(self._base_values[self.space.index_of(x)] - self.shift)

    def to_optimality_prob(self, x: Sequence) -> float:
        return math.exp(self.shifted(x))

    def probs(self) -> np.ndarray:
        return np.exp(self.values())


def to_optimality_prob(model: OptimalityModel, x: Sequence) -> float:
    return model.to_optimality_prob(x)
