"""Tabular autoregressive softmax policies over a :class:`SequenceSpace`.

Each decision prefix owns one row of logits over the full vocabulary
(EOS included). The probability of a sequence is the product of the
per-step softmax conditionals; the EOS forced at depth ``max_len`` has
probability one and no row.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from scipy.special import log_softmax, softmax

from .seqspace import Sequence, SequenceSpace, Vocab

# log of a zero conditional in from_distribution; exp(-700) ~ 1e-304
LOG_FLOOR = -700.0


class TabularPolicy:
    """Prefix-conditioned logit table.

    ``logits`` has shape ``space.logits_shape`` and is the only mutable
    state. All probability arithmetic goes through ``log_softmax``.
    """

    def __init__(self, space: SequenceSpace, logits=None):
        self.space = space
        if logits is None:
            logits = np.zeros(space.logits_shape)
        logits = np.array(logits, dtype=np.float64)
        if logits.shape != space.logits_shape:
            raise ValueError(f"logits shape {logits.shape} != {space.logits_shape}")
        if not np.all(np.isfinite(logits)):
            raise ValueError("logits must be finite")
        self.logits = logits

    def copy(self) -> "TabularPolicy":
        return TabularPolicy(self.space, self.logits.copy())

    def conditionals(self) -> np.ndarray:
        """Softmax of every prefix row."""
        return softmax(self.logits, axis=1)

    def log_conditionals(self) -> np.ndarray:
        return log_softmax(self.logits, axis=1)

    def log_probs(self) -> np.ndarray:
        """log pi(x) for every sequence, in index order."""
        if self.space.n_prefixes == 0:
            return np.zeros(self.space.size)
        return self.space.path_matrix @ self.log_conditionals().ravel()

    def distribution(self) -> np.ndarray:
        return np.exp(self.log_probs())

    def log_prob(self, x: Sequence) -> float:
        return float(self.log_probs()[self.space.index_of(x)])

    def grad_log_prob(self, x: Sequence) -> np.ndarray:
        """Score table d log pi(x) / d logits."""
        i = self.space.index_of(x)
        w = np.zeros(self.space.size)
        w[i] = 1.0
        return self.score_sum(w)

    def score_sum(self, weights: np.ndarray, probs: np.ndarray | None = None) -> np.ndarray:
        """sum_x weights[x] * grad_log_prob(x), without materializing per-sequence tables.

        For a visited row the score is ``onehot(chosen) - softmax(row)``, so the
        weighted sum splits into token counts minus row-visit mass times the
        row's conditionals.
        """
        space = self.space
        if space.n_prefixes == 0:
            return np.zeros(space.logits_shape)
        if probs is None:
            probs = self.conditionals()
        weights = np.asarray(weights, dtype=np.float64)
        chosen = (space.path_matrix.T @ weights).reshape(space.logits_shape)
        visits = space.visit_matrix.T @ weights
        return chosen - visits[:, None] * probs

    def score_sq_norms(self) -> np.ndarray:
        """||grad_log_prob(x)||^2 for every sequence.

        Each visited row contributes ``1 - 2 p_t + ||p||^2`` for chosen token t.
        """
        space = self.space
        if space.n_prefixes == 0:
            return np.zeros(space.size)
        p = self.conditionals()
        per_entry = (1.0 - 2.0 * p).ravel()
        per_row = np.sum(p * p, axis=1)
        return space.path_matrix @ per_entry + space.visit_matrix @ per_row

    def sample(self, rng: np.random.Generator) -> Sequence:
        return self.space.sequence_at(int(self.sample_indices(rng, 1)[0]))

    def sample_indices(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Ancestral sampling of ``n`` sequences, returned as indices."""
        space = self.space
        state = np.zeros(n, dtype=np.int64)
        if space.n_prefixes == 0:
            return state
        cdf = np.cumsum(self.conditionals(), axis=1)
        eos = space.vocab.eos_index
        active = np.ones(n, dtype=bool)
        for _ in range(space.max_len):
            rows = state[active]
            u = rng.random(rows.size)
            c = cdf[rows]
            tok = np.minimum((c < u[:, None] * c[:, -1:]).sum(axis=1), c.shape[1] - 1)
            stop = tok == eos
            nxt = rows.copy()
            go = ~stop
            nxt[go] = space.child[rows[go], tok[go]]
            idx = np.flatnonzero(active)
            state[idx] = nxt
            active[idx[stop]] = False
            if not active.any():
                break
        return state

    def to_json(self) -> dict:
        return {
            "vocab": {"symbols": list(self.space.vocab.symbols), "eos": self.space.vocab.eos},
            "max_len": self.space.max_len,
            "logits": self.logits.tolist(),
        }


def from_distribution(space: SequenceSpace, p, tol: float = 1e-9) -> TabularPolicy:
    """Policy whose induced distribution equals ``p``.

    Row conditionals are ratios of subtree masses. Zero conditionals get
    logit ``LOG_FLOOR``; rows with zero mass get uniform conditionals.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (space.size,):
        raise ValueError(f"expected a vector of length {space.size}, got shape {p.shape}")
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
    if space.n_prefixes == 0:
        return TabularPolicy(space)

    # subtree mass of every sequence, accumulated deepest level first
    mass = p.copy()
    for k in range(space.max_len, 0, -1):
        at_k = np.flatnonzero(space.lengths == k)
        np.add.at(mass, space.parent[at_k], mass[at_k])

    V = space.vocab.size
    R = space.n_prefixes
    numer = np.zeros((R, V))
    numer[:, space.vocab.eos_index] = p[:R]
    for t in space.vocab.content:
        numer[:, t] = mass[space.child[:, t]]
    total = mass[:R]
    logits = np.zeros((R, V))
    live = total > 0
    with np.errstate(divide="ignore"):
        cond = np.log(numer[live]) - np.log(total[live])[:, None]
    logits[live] = np.maximum(cond, LOG_FLOOR)
    return TabularPolicy(space, logits)


def init_prior(space: SequenceSpace, scheme: str = "uniform-logits", seed: int = 0,
               sigma: float = 1.0, path: str | Path | None = None) -> TabularPolicy:
    """Frozen prior for fine-tuning.

    ``scheme`` is one of ``uniform-logits``, ``gaussian-logits`` (iid normal
    logits with std ``sigma`` drawn from ``seed``) or ``file`` (a policy
    snapshot at ``path``).
    """
    if scheme == "uniform-logits":
        return TabularPolicy(space)
    if scheme == "gaussian-logits":
        if sigma < 0:
            raise ValueError("sigma must be >= 0")
        rng = np.random.default_rng(seed)
        return TabularPolicy(space, sigma * rng.standard_normal(space.logits_shape))
    if scheme == "file":
        if path is None:
            raise ValueError("file scheme needs a path")
        policy = load_policy(path)
        if policy.space != space:
            raise ValueError(f"policy file is for {policy.space!r}, expected {space!r}")
        return policy
    raise ValueError(f"unknown prior scheme {scheme!r}")


def policy_from_json(obj: dict, space: SequenceSpace | None = None) -> TabularPolicy:
    vocab = Vocab.from_symbols(obj["vocab"]["symbols"], obj["vocab"]["eos"])
    if space is None:
        space = SequenceSpace(vocab, int(obj["max_len"]))
    elif space.vocab != vocab or space.max_len != obj["max_len"]:
        raise ValueError("policy snapshot does not match the space")
    logits = np.array(obj["logits"], dtype=np.float64).reshape(space.logits_shape)
    return TabularPolicy(space, logits)


def load_policy(path: str | Path) -> TabularPolicy:
    try:
        obj = json.loads(Path(path).read_text())
        return policy_from_json(obj)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as e:
        raise ValueError(f"cannot read policy file {path}: {e}") from e
