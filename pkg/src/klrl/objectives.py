"""Fine-tuning objectives and their gradient estimators.

Four objectives over a tabular policy:

``pure-rl``  E_pi[r]
``klrl``     E_pi[r] - beta KL(pi, prior)  ==  E_pi[r'] with r' = r + beta (log prior - log pi)
``gdc``      -KL(target, pi)
``mle``      mean log pi(x) over a dataset (forward KL from the empirical distribution)

Each has an exact gradient (enumeration) and, except MLE, a Monte-Carlo
score-function estimator. Monte-Carlo gradients are accumulated as per-sequence
weights and pushed through :meth:`TabularPolicy.score_sum`, so no per-sample
gradient tables are built.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .oracle import TargetDistribution, kl
from .policy import TabularPolicy
from .reward import as_values

KINDS = ("pure-rl", "klrl", "gdc", "mle")
_KIND_ALIASES = {"purerl": "pure-rl", "pure_rl": "pure-rl", "rl": "pure-rl", "kl-rl": "klrl"}


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str
    beta: float = 1.0
    estimator: str = "exact"  # or "mc"
    batch_size: int = 512
    baseline: str = "none"  # or "batch-mean"
    gdc_weighting: str = "exact-Z"  # or "self-normalized"

    def __post_init__(self):
        kind = _KIND_ALIASES.get(self.kind.lower(), self.kind.lower())
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.estimator not in ("exact", "mc"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.baseline not in ("none", "batch-mean"):
            raise ValueError(f"unknown baseline {self.baseline!r}")
        if self.gdc_weighting not in ("exact-Z", "self-normalized"):
            raise ValueError(f"unknown gdc weighting {self.gdc_weighting!r}")
        # beta = 0 is allowed for klrl only as the reduction to pure-rl
        if kind == "gdc" and not self.beta > 0 or kind == "klrl" and not self.beta >= 0:
            raise ValueError(f"invalid beta {self.beta} for {kind}")
        if self.estimator == "mc":
            if self.batch_size < 1:
                raise ValueError("batch_size must be >= 1")
            if self.baseline == "batch-mean" and self.batch_size < 2:
                raise ValueError("batch-mean baseline needs batch_size >= 2")
            if kind == "mle":
                raise ValueError("mle gradients are computed from the dataset; use the exact estimator")

    @classmethod
    def from_json(cls, obj: dict) -> "ObjectiveSpec":
        est = obj.get("estimator", {"type": "exact"})
        if isinstance(est, str):
            est = {"type": est}
        kw = {}
        if est.get("type", "exact") in ("mc", "monte-carlo", "montecarlo"):
            kw = {
                "estimator": "mc",
                "batch_size": int(est.get("batch", est.get("batch_size", 512))),
                "baseline": est.get("baseline", "none"),
            }
        return cls(
            kind=obj["kind"],
            beta=float(obj.get("beta", 1.0)),
            gdc_weighting=obj.get("gdc_weighting", "exact-Z"),
            **kw,
        )

    def to_json(self) -> dict:
        out = {"kind": self.kind, "beta": self.beta}
        if self.estimator == "mc":
            out["estimator"] = {"type": "mc", "batch": self.batch_size, "baseline": self.baseline}
        else:
            out["estimator"] = {"type": "exact"}
        if self.kind == "gdc":
            out["gdc_weighting"] = self.gdc_weighting
        return out


@dataclass
class GradientEstimate:
    grad: np.ndarray
    objective_value: float
    diag: dict = field(default_factory=dict)


def reshaped_reward_values(policy: TabularPolicy, prior: TabularPolicy, reward, beta: float) -> np.ndarray:
    r = as_values(reward, policy.space)
    return r + beta * (prior.log_probs() - policy.log_probs())


def reshaped_reward(policy, prior, reward, beta, x) -> float:
    return float(reshaped_reward_values(policy, prior, reward, beta)[policy.space.index_of(x)])


def _score_mean(policy: TabularPolicy, idx: np.ndarray, c: np.ndarray) -> tuple[np.ndarray, dict]:
    """Mean of c_i * score(x_i) over the sampled indices.

    ``est_variance_norm`` is the trace of the estimated covariance of that mean.
    """
    n = len(idx)
    w = np.bincount(idx, weights=c, minlength=policy.space.size) / n
    grad = policy.score_sum(w)
    if n > 1:
        second = np.mean(c * c * policy.score_sq_norms()[idx])
        var = max(second - float(np.sum(grad * grad)), 0.0) / (n - 1)
    else:
        var = float("nan")
    return grad, {"batch_size": n, "est_variance_norm": var}


def _baselined(f: np.ndarray, spec: ObjectiveSpec) -> np.ndarray:
    if spec.baseline == "batch-mean":
        return f - f.mean()
    return f


def grad_pure_rl(policy: TabularPolicy, reward, spec: ObjectiveSpec,
                 rng: np.random.Generator | None = None) -> GradientEstimate:
    r = as_values(reward, policy.space)
    if spec.estimator == "exact":
        p = policy.distribution()
        return GradientEstimate(policy.score_sum(p * r), float(np.dot(p, r)))
    idx = policy.sample_indices(rng, spec.batch_size)
    grad, diag = _score_mean(policy, idx, _baselined(r[idx], spec))
    return GradientEstimate(grad, float(r[idx].mean()), diag)


def grad_klrl(policy: TabularPolicy, prior: TabularPolicy, reward, spec: ObjectiveSpec,
              rng: np.random.Generator | None = None) -> GradientEstimate:
    """Score-function gradient of E_pi[r'].

    Differentiating r' itself adds -beta E_pi[score], which is zero, so the
    score-only form is exact (enumeration) and unbiased (Monte-Carlo).
    """
    rp = reshaped_reward_values(policy, prior, reward, spec.beta)
    if spec.estimator == "exact":
        p = policy.distribution()
        return GradientEstimate(policy.score_sum(p * rp), float(np.dot(p, rp)))
    idx = policy.sample_indices(rng, spec.batch_size)
    grad, diag = _score_mean(policy, idx, _baselined(rp[idx], spec))
    return GradientEstimate(grad, float(rp[idx].mean()), diag)


def grad_gdc(policy: TabularPolicy, target: TargetDistribution, spec: ObjectiveSpec,
             rng: np.random.Generator | None = None) -> GradientEstimate:
    """Ascent direction on -KL(target, pi).

    Monte-Carlo samples come from pi and are importance-weighted by
    target/pi, either exactly (``exact-Z``) or self-normalized.
    """
    tp = target.probs
    logp = policy.log_probs()
    if spec.estimator == "exact":
        return GradientEstimate(policy.score_sum(tp), -kl(tp, np.exp(logp)))
    idx = policy.sample_indices(rng, spec.batch_size)
    with np.errstate(divide="ignore"):
        log_ratio = (target.log_probs - logp)[idx]
    w = np.exp(log_ratio)
    c = w * (len(idx) / w.sum()) if spec.gdc_weighting == "self-normalized" else w
    grad, diag = _score_mean(policy, idx, c)
    # -KL(target, pi) = E_pi[w (log pi - log target)], zero-weight samples contribute 0
    m = w > 0
    est = -float(np.sum(w[m] * log_ratio[m])) / len(idx)
    return GradientEstimate(grad, est, diag)


def grad_mle(policy: TabularPolicy, data) -> GradientEstimate:
    """Mean score over the dataset; objective is the mean log-likelihood."""
    idx = np.asarray(data, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("dataset is empty")
    w = np.bincount(idx, minlength=policy.space.size) / idx.size
    logp = policy.log_probs()
    return GradientEstimate(policy.score_sum(w), float(np.dot(w, logp)))


def exact_objective(spec: ObjectiveSpec, policy: TabularPolicy, prior: TabularPolicy,
                    reward_values: np.ndarray, target: TargetDistribution | None = None,
                    data=None) -> float:
    p = policy.distribution()
    if spec.kind == "pure-rl":
        return float(np.dot(p, reward_values))
    if spec.kind == "klrl":
        return float(np.dot(p, reshaped_reward_values(policy, prior, reward_values, spec.beta)))
    if spec.kind == "gdc":
        return -kl(target.probs, p)
    w = np.bincount(np.asarray(data, dtype=np.int64), minlength=policy.space.size) / len(data)
    return float(np.dot(w, policy.log_probs()))


def estimate_gradient(spec: ObjectiveSpec, policy: TabularPolicy, prior: TabularPolicy,
                      reward_values: np.ndarray, target: TargetDistribution | None = None,
                      data=None, rng: np.random.Generator | None = None) -> GradientEstimate:
    if spec.kind == "pure-rl":
        return grad_pure_rl(policy, reward_values, spec, rng)
    if spec.kind == "klrl":
        return grad_klrl(policy, prior, reward_values, spec, rng)
    if spec.kind == "gdc":
        return grad_gdc(policy, target, spec, rng)
    return grad_mle(policy, data)
