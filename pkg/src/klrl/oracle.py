"""Exact, enumeration-based quantities: Gibbs posterior, partition function,
divergences, expected reward, KL-regularised objective, and ELBO.

Everything here sums over the whole sequence space in index order, so results
are deterministic and exact up to float rounding.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import logsumexp

from .policy import TabularPolicy
from .reward import OptimalityModel, as_values


@dataclass(frozen=True)
class TargetDistribution:
    """Gibbs posterior ``probs ∝ prior * exp(reward / beta)`` with its log-normaliser."""

    space: object
    probs: np.ndarray
    log_Z: float
    beta: float

    @property
    def log_probs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.probs)


def _dist(p) -> np.ndarray:
    if isinstance(p, TabularPolicy):
        return p.distribution()
    if isinstance(p, TargetDistribution):
        return p.probs
    return np.asarray(p, dtype=np.float64)


def _log_tilted(prior: TabularPolicy, reward, beta: float) -> np.ndarray:
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    return prior.log_probs() + as_values(reward, prior.space) / beta


def partition_function(prior: TabularPolicy, reward, beta: float = 1.0) -> float:
    """log Z = log sum_x prior(x) exp(r(x) / beta)."""
    return float(logsumexp(_log_tilted(prior, reward, beta)))


def gibbs_posterior(prior: TabularPolicy, reward, beta: float = 1.0) -> TargetDistribution:
    logw = _log_tilted(prior, reward, beta)
    log_Z = float(logsumexp(logw))
    return TargetDistribution(prior.space, np.exp(logw - log_Z), log_Z, float(beta))


def empirical_distribution(space, data) -> TargetDistribution:
    """Empirical distribution of a dataset of sequence indices (MLE target)."""
    idx = np.asarray(data, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("dataset is empty")
    probs = np.bincount(idx, minlength=space.size) / idx.size
    return TargetDistribution(space, probs, 0.0, 1.0)


def kl(p, q) -> float:
    """KL(p || q) in nats; 0 log 0 = 0, and +inf when p puts mass where q has none."""
    p, q = _dist(p), _dist(q)
    if p.shape != q.shape:
        raise ValueError(f"mismatched spaces: {p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        return float("inf")
    ps, qs = p[support], q[support]
    # rounding can leave a tiny negative value
    return max(float(np.sum(ps * (np.log(ps) - np.log(qs)))), 0.0) + 0.0


def entropy(p) -> float:
    p = _dist(p)
    support = p > 0
    return max(float(-np.sum(p[support] * np.log(p[support]))), 0.0) + 0.0


def expected_reward(p, reward, space=None) -> float:
    p = _dist(p)
    if space is None:
        r = np.asarray(reward, dtype=np.float64)
    else:
        r = as_values(reward, space)
    return float(np.dot(p, r))


def klrl_objective_exact(policy: TabularPolicy, prior: TabularPolicy, reward, beta: float) -> float:
    """E_pi[r] - beta * KL(pi, prior); -inf if the KL is infinite and beta > 0."""
    p = policy.distribution()
    r = as_values(reward, policy.space)
    penalty = kl(p, prior.distribution())
    if beta == 0:
        return float(np.dot(p, r))
    return float(np.dot(p, r)) - beta * penalty


def elbo(policy: TabularPolicy, prior: TabularPolicy, model: OptimalityModel) -> float:
    """sum_x pi(x) (r~(x) + log prior(x) - log pi(x)), zero-mass terms dropped."""
    p = policy.distribution()
    logp = policy.log_probs()
    log0 = prior.log_probs()
    rt = as_values(model, policy.space)
    m = p > 0
    return float(np.sum(p[m] * (rt[m] + log0[m] - logp[m])))


@dataclass(frozen=True)
class IdentityReport:
    """Residuals of the three exact identities at one policy.

    residual_eq7
        |J(theta) - (beta log Z - beta KL(pi, pi*))|
    residual_eq3_eq4
        |E_pi[r'] - J(theta)| with r' the reshaped reward
    elbo_gap_violation
        max(0, ELBO - log Z) for the max-shifted reward at beta = 1
    """

    residual_eq7: float
    residual_eq3_eq4: float
    elbo_gap_violation: float
    log_Z: float
    beta: float

    def to_json(self) -> dict:
        return asdict(self)


def verify_identities(policy: TabularPolicy, prior: TabularPolicy, reward, beta: float,
                      log_z_offset: float = 0.0) -> IdentityReport:
    """Evaluate the identities; ``log_z_offset`` corrupts log Z on purpose (test hook)."""
    from .objectives import reshaped_reward_values

    space = policy.space
    r = as_values(reward, space)
    target = gibbs_posterior(prior, r, beta)
    log_Z = target.log_Z + log_z_offset
    J = klrl_objective_exact(policy, prior, r, beta)
    p = policy.distribution()

    affine = -beta * kl(p, target.probs) + beta * log_Z
    res_affine = abs(J - affine)

    reshaped = float(np.dot(p, reshaped_reward_values(policy, prior, r, beta)))
    res_reshaped = abs(reshaped - J)

    model = OptimalityModel(r, space)
    log_Z1 = partition_function(prior, model, 1.0) + log_z_offset
    violation = max(0.0, elbo(policy, prior, model) - log_Z1)

    return IdentityReport(res_affine, res_reshaped, violation, log_Z, float(beta))
