"""Experiment configuration: one JSON document per run."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .objectives import ObjectiveSpec
from .policy import TabularPolicy, init_prior, load_policy
from .reward import RewardFn, reward_from_json
from .seqspace import SequenceSpace, Vocab
from .trainer import METRIC_NAMES, StopCondition, TrainConfig

DEFAULT_BETAS = (0.1, 0.3, 1.0, 3.0, 10.0)

_number = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}

SCHEMA = {
    "type": "object",
    "required": ["space", "reward"],
    "properties": {
        "space": {
            "type": "object",
            "required": ["symbols", "eos", "max_len"],
            "properties": {
                "symbols": {"type": "array", "items": {"type": "string"}, "minItems": 2},
                "eos": {"type": "string"},
                "max_len": {"type": "integer", "minimum": 0},
            },
            "additionalProperties": False,
        },
        "prior": {
            "type": "object",
            "properties": {
                "scheme": {"enum": ["uniform-logits", "gaussian-logits", "file"]},
                "sigma": {"type": "number", "minimum": 0},
                "seed": {"type": "integer"},
                "file": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "reward": {"type": "object", "required": ["kind"]},
        "objective": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"type": "string"},
                "beta": _pos,
                "estimator": {
                    "type": "object",
                    "properties": {
                        "type": {"enum": ["exact", "mc"]},
                        "batch": {"type": "integer", "minimum": 1},
                        "baseline": {"enum": ["none", "batch-mean"]},
                    },
                    "additionalProperties": False,
                },
                "gdc_weighting": {"enum": ["exact-Z", "self-normalized"]},
                "data": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "train": {
            "type": "object",
            "properties": {
                "steps": {"type": "integer", "minimum": 1},
                "lr": {"type": "number", "minimum": 0},
                "lr_decay": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "seed": {"type": "integer"},
                "log_every": {"type": "integer", "minimum": 1},
                "stop_when": {
                    "type": "object",
                    "required": ["metric", "threshold"],
                    "properties": {
                        "metric": {"enum": list(METRIC_NAMES)},
                        "threshold": _number,
                        "mode": {"enum": ["below", "above"]},
                    },
                    "additionalProperties": False,
                },
                "init_file": {"type": "string"},
            },
            "additionalProperties": False,
        },
        "sweep": {
            "type": "object",
            "properties": {"betas": {"type": "array", "items": _pos, "minItems": 1}},
            "additionalProperties": False,
        },
        "verify": {
            "type": "object",
            "properties": {
                "n_policies": {"type": "integer", "minimum": 0},
                "sigma": {"type": "number", "minimum": 0},
                "betas": {"type": "array", "items": _pos, "minItems": 1},
            },
            "additionalProperties": False,
        },
        "out": {"type": "string"},
    },
    "additionalProperties": False,
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    raw: dict
    space: SequenceSpace
    prior: TabularPolicy
    reward: RewardFn
    objective: ObjectiveSpec
    train: TrainConfig
    out: str
    base_dir: Path = field(default_factory=Path)
    data: np.ndarray | None = None
    sweep_betas: tuple = DEFAULT_BETAS
    verify_n: int = 100
    verify_sigma: float = 2.0
    verify_betas: tuple | None = None

    @property
    def reward_values(self) -> np.ndarray:
        if not hasattr(self, "_rv"):
            self._rv = self.reward.values(self.space)
        return self._rv

    def initial_policy(self) -> TabularPolicy:
        init = self.raw.get("train", {}).get("init_file")
        if init is None:
            return self.prior.copy()
        policy = load_policy(self.base_dir / init)
        if policy.space != self.space:
            raise ConfigError("train.init_file does not match the configured space")
        return policy


def parse_config(raw: dict, base_dir: str | Path = ".", seed: int | None = None) -> ExperimentConfig:
    """Validate ``raw`` and build the experiment objects; raises ConfigError."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as e:
        path = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {e.message}") from None
    base_dir = Path(base_dir)
    try:
        sp = raw["space"]
        space = SequenceSpace(Vocab.from_symbols(sp["symbols"], sp["eos"]), sp["max_len"])

        pr = raw.get("prior", {})
        scheme = pr.get("scheme", "uniform-logits")
        prior = init_prior(
            space,
            scheme,
            seed=pr.get("seed", 0),
            sigma=pr.get("sigma", 1.0),
            path=base_dir / pr["file"] if scheme == "file" else None,
        )
        reward = reward_from_json(raw["reward"], space)
        reward.values(space)  # surfaces missing table entries / unknown tokens now

        obj = dict(raw.get("objective", {"kind": "klrl"}))
        data_strings = obj.pop("data", None)
        objective = ObjectiveSpec.from_json(obj)
        data = None
        if objective.kind == "mle":
            if not data_strings:
                raise ConfigError("mle objective needs objective.data")
            data = np.array([space.index_of(space.parse(s)) for s in data_strings], dtype=np.int64)

        tr = dict(raw.get("train", {}))
        stop = tr.get("stop_when")
        train = TrainConfig(
            objective=objective,
            steps=tr.get("steps", 1000),
            lr=tr.get("lr", 0.5),
            lr_decay=tr.get("lr_decay", 1.0),
            seed=seed if seed is not None else tr.get("seed", 0),
            log_every=tr.get("log_every", 50),
            stop_when=StopCondition(stop["metric"], float(stop["threshold"]), stop.get("mode", "below"))
            if stop else None,
        )
        ver = raw.get("verify", {})
        betas = raw.get("sweep", {}).get("betas", DEFAULT_BETAS)
        return ExperimentConfig(
            raw=raw,
            space=space,
            prior=prior,
            reward=reward,
            objective=objective,
            train=train,
            out=raw.get("out", "runs/latest"),
            base_dir=base_dir,
            data=data,
            sweep_betas=tuple(float(b) for b in betas),
            verify_n=ver.get("n_policies", 100),
            verify_sigma=float(ver.get("sigma", 2.0)),
            verify_betas=tuple(float(b) for b in ver["betas"]) if "betas" in ver else None,
        )
    except ConfigError:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise ConfigError(str(e)) from e


def load_config(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return parse_config(raw, path.parent, seed)
