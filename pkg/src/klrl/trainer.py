"""Plain gradient-ascent training with exact per-step diagnostics."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .objectives import ObjectiveSpec, estimate_gradient, exact_objective
from .oracle import (
    TargetDistribution,
    elbo,
    empirical_distribution,
    entropy,
    gibbs_posterior,
    kl,
    partition_function,
)
from .policy import TabularPolicy
from .reward import OptimalityModel, argmax_indices, as_values

log = logging.getLogger(__name__)

SUPPORT_THRESHOLD = 1e-6
# relative slack for the monotone-ascent check
MONOTONE_TOL = 1e-12


class NumericalAbort(RuntimeError):
    """Training stopped on a non-finite gradient or a failed ascent check."""

    def __init__(self, message: str, row: "MetricsRow | None" = None, trajectory=None):
        super().__init__(message)
        self.row = row
        self.trajectory = trajectory


@dataclass(frozen=True)
class StopCondition:
    metric: str
    threshold: float
    mode: str = "below"  # stop once metric < threshold ("above": metric > threshold)

    def satisfied(self, value: float) -> bool:
        if value is None:
            return False
        if self.mode == "above":
            return value > self.threshold
        return value < self.threshold


@dataclass(frozen=True)
class TrainConfig:
    objective: ObjectiveSpec
    steps: int = 1000
    lr: float = 0.5
    lr_decay: float = 1.0
    seed: int = 0
    log_every: int = 50
    stop_when: StopCondition | None = None
    # None: on for exact gradients with lr <= 0.1
    check_monotone: bool | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.log_every < 1:
            raise ValueError("log_every must be >= 1")
        if self.lr < 0 or not math.isfinite(self.lr):
            raise ValueError("lr must be finite and >= 0")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.stop_when is not None and self.stop_when.metric not in METRIC_NAMES:
            raise ValueError(f"unknown stop metric {self.stop_when.metric!r}")

    @property
    def monotone(self) -> bool:
        if self.check_monotone is not None:
            return self.check_monotone
        return self.objective.estimator == "exact" and 0 < self.lr <= 0.1

    def to_json(self) -> dict:
        out = {
            "steps": self.steps,
            "lr": self.lr,
            "lr_decay": self.lr_decay,
            "seed": self.seed,
            "log_every": self.log_every,
            "objective": self.objective.to_json(),
        }
        if self.stop_when is not None:
            out["stop_when"] = asdict(self.stop_when)
        return out


@dataclass(frozen=True)
class MetricsRow:
    step: int
    objective: float
    expected_reward: float
    kl_to_prior: float
    kl_to_target: float
    fwd_kl_from_target: float
    entropy: float
    elbo_gap: float | None
    argmax_mass: float
    support_size: int
    max_prob: float


METRIC_NAMES = tuple(f.name for f in fields(MetricsRow))


@dataclass
class Trajectory:
    config: TrainConfig
    rows: list[MetricsRow]
    policy: TabularPolicy
    target: TargetDistribution
    stop_satisfied: bool | None = None

    @property
    def final(self) -> MetricsRow:
        return self.rows[-1]


@dataclass(frozen=True)
class CollapseReport:
    entropy: float
    argmax_mass: float
    support_size: int
    mass_outside_argmax: float
    tv_to_nearest_argmax_distribution: float


@dataclass(frozen=True)
class SweepRow:
    beta: float
    expected_reward: float
    kl_to_prior: float
    entropy: float


def target_for(spec: ObjectiveSpec, prior: TabularPolicy, reward_values: np.ndarray,
               data=None) -> TargetDistribution:
    """Distribution the objective is measured against in the diagnostics.

    MLE uses the empirical distribution of ``data``; every other objective
    uses the Gibbs posterior at the objective's beta.
    """
    if spec.kind == "mle":
        return empirical_distribution(prior.space, data)
    return gibbs_posterior(prior, reward_values, spec.beta)


class _Diagnostics:
    def __init__(self, spec, prior, reward_values, target, data):
        self.spec = spec
        self.prior = prior
        self.r = reward_values
        self.target = target
        self.data = data
        self.prior_dist = prior.distribution()
        self.argmax = argmax_indices(reward_values)
        self.with_elbo = spec.kind in ("klrl", "gdc") and spec.beta == 1.0
        if self.with_elbo:
            self.optimality = OptimalityModel(reward_values, prior.space)
            self.log_Z1 = partition_function(prior, self.optimality, 1.0)

    def row(self, step: int, policy: TabularPolicy) -> MetricsRow:
        p = policy.distribution()
        elbo_gap = self.log_Z1 - elbo(policy, self.prior, self.optimality) if self.with_elbo else None
        return MetricsRow(
            step=step,
            objective=exact_objective(self.spec, policy, self.prior, self.r, self.target, self.data),
            expected_reward=float(np.dot(p, self.r)),
            kl_to_prior=kl(p, self.prior_dist),
            kl_to_target=kl(p, self.target.probs),
            fwd_kl_from_target=kl(self.target.probs, p),
            entropy=entropy(p),
            elbo_gap=elbo_gap,
            argmax_mass=float(min(1.0, p[self.argmax].sum())),
            support_size=int(np.count_nonzero(p > SUPPORT_THRESHOLD)),
            max_prob=float(p.max()),
        )

    def metric(self, name: str, policy: TabularPolicy) -> float:
        p = policy.distribution()
        if name == "kl_to_target":
            return kl(p, self.target.probs)
        if name == "fwd_kl_from_target":
            return kl(self.target.probs, p)
        if name == "entropy":
            return entropy(p)
        if name == "argmax_mass":
            return float(p[self.argmax].sum())
        return getattr(self.row(0, policy), name)


def train(policy: TabularPolicy, prior: TabularPolicy, reward, config: TrainConfig,
          data=None) -> Trajectory:
    """Gradient ascent from ``policy`` (left untouched; a copy is trained).

    Rows are logged after steps ``log_every, 2*log_every, ...`` and after the
    final step. With ``stop_when`` set, training ends at the first step whose
    metric meets the condition, and that step is logged.
    """
    spec = config.objective
    space = policy.space
    r = as_values(reward, space)
    target = target_for(spec, prior, r, data)
    diag = _Diagnostics(spec, prior, r, target, data)
    rng = np.random.default_rng(config.seed)
    theta = policy.copy()

    rows: list[MetricsRow] = []
    stop_satisfied = False if config.stop_when is not None else None
    prev = exact_objective(spec, theta, prior, r, target, data) if config.monotone else None
    lr = config.lr

    for step in range(1, config.steps + 1):
        est = estimate_gradient(spec, theta, prior, r, target, data, rng)
        if not np.all(np.isfinite(est.grad)):
            row = diag.row(step, theta)
            rows.append(row)
            raise NumericalAbort(f"non-finite gradient at step {step}", row,
                                 Trajectory(config, rows, theta, target, stop_satisfied))
        with np.errstate(over="ignore", invalid="ignore"):
            logits = theta.logits + lr * est.grad
        if not np.all(np.isfinite(logits)):
            # keep the last finite policy for the report
            row = diag.row(step, theta)
            rows.append(row)
            raise NumericalAbort(f"non-finite logits at step {step}", row,
                                 Trajectory(config, rows, theta, target, stop_satisfied))
        theta.logits[...] = logits
        lr *= config.lr_decay

        if prev is not None:
            cur = exact_objective(spec, theta, prior, r, target, data)
            if cur < prev - MONOTONE_TOL * (1.0 + abs(prev)):
                row = diag.row(step, theta)
                rows.append(row)
                raise NumericalAbort(
                    f"objective decreased at step {step}: {prev!r} -> {cur!r}", row,
                    Trajectory(config, rows, theta, target, stop_satisfied))
            prev = cur

        stop = False
        if config.stop_when is not None:
            value = diag.metric(config.stop_when.metric, theta)
            stop = config.stop_when.satisfied(value)
            if stop:
                stop_satisfied = True
        if stop or step % config.log_every == 0 or step == config.steps:
            rows.append(diag.row(step, theta))
        if stop:
            log.info("stop condition met at step %d", step)
            break

    return Trajectory(config, rows, theta, target, stop_satisfied)


def collapse_report(policy: TabularPolicy, reward) -> CollapseReport:
    p = policy.distribution()
    idx = argmax_indices(as_values(reward, policy.space))
    mass = float(min(1.0, p[idx].sum()))
    if mass > 0:
        q = np.zeros_like(p)
        q[idx] = p[idx] / p[idx].sum()
        tv = 0.5 * float(np.abs(p - q).sum())
    else:
        tv = 1.0
    return CollapseReport(
        entropy=entropy(p),
        argmax_mass=mass,
        support_size=int(np.count_nonzero(p > SUPPORT_THRESHOLD)),
        mass_outside_argmax=1.0 - mass,
        tv_to_nearest_argmax_distribution=tv,
    )


def beta_sweep(prior: TabularPolicy, reward, betas) -> list[SweepRow]:
    betas = [float(b) for b in betas]
    if not betas:
        raise ValueError("need at least one beta")
    if any(b <= 0 for b in betas):
        raise ValueError("betas must be > 0")
    if any(b2 < b1 for b1, b2 in zip(betas, betas[1:])):
        raise ValueError("betas must be sorted ascending")
    r = as_values(reward, prior.space)
    p0 = prior.distribution()
    out = []
    for b in betas:
        t = gibbs_posterior(prior, r, b)
        out.append(SweepRow(b, float(np.dot(t.probs, r)), kl(t.probs, p0), entropy(t.probs)))
    return out
