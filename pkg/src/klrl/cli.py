"""Command-line entry point.

    klrl enumerate --config CFG [--out DIR]
    klrl oracle    --config CFG [--out DIR]
    klrl train     --config CFG [--out DIR] [--seed N]
    klrl verify    --config CFG [--out DIR] [--seed N]
    klrl sweep     --config CFG [--out DIR] [--betas 0.1,1,10]

Exit codes: 0 success, 2 invalid config, 3 stop condition unmet,
4 numerical abort, 5 identity verification failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .oracle import (
    elbo,
    entropy,
    gibbs_posterior,
    kl,
    klrl_objective_exact,
    partition_function,
    verify_identities,
)
from .policy import TabularPolicy, from_distribution
from .reward import OptimalityModel, argmax_indices
from .serialize import sweep_svg, write_csv, write_json
from .trainer import METRIC_NAMES, NumericalAbort, beta_sweep, train

log = logging.getLogger("klrl")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STOP_UNMET = 3
EXIT_NUMERICAL = 4
EXIT_VERIFY = 5

IDENTITY_TOL = 1e-8
OPTIMUM_TOL = 1e-9
ELBO_TOL = 1e-9

METRICS_HEADER = list(METRIC_NAMES)


def _out_dir(cfg: ExperimentConfig, out: str | None) -> Path:
    d = Path(out if out is not None else cfg.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_enumerate(cfg: ExperimentConfig, out: str | None = None) -> int:
    d = _out_dir(cfg, out)
    r = cfg.reward_values
    rows = [(i, cfg.space.render(x), r[i]) for i, x in enumerate(cfg.space)]
    write_csv(d / "sequences.csv", ["index", "sequence", "reward"], rows)
    return EXIT_OK


def cmd_oracle(cfg: ExperimentConfig, out: str | None = None) -> int:
    d = _out_dir(cfg, out)
    t = gibbs_posterior(cfg.prior, cfg.reward_values, cfg.objective.beta)
    write_json(d / "oracle.json", {
        "log_Z": t.log_Z,
        "beta": t.beta,
        "posterior": t.probs,
        "argmax_set": argmax_indices(cfg.reward_values),
        "entropy_of_posterior": entropy(t.probs),
    })
    return EXIT_OK


def _row_values(row) -> list:
    return [getattr(row, name) for name in METRIC_NAMES]


def cmd_train(cfg: ExperimentConfig, out: str | None = None) -> int:
    d = _out_dir(cfg, out)
    code = EXIT_OK
    try:
        traj = train(cfg.initial_policy(), cfg.prior, cfg.reward_values, cfg.train, cfg.data)
        reason = None
    except NumericalAbort as e:
        log.error("%s", e)
        traj = e.trajectory
        reason = str(e)
        code = EXIT_NUMERICAL
    write_csv(d / "metrics.csv", METRICS_HEADER, [_row_values(r) for r in traj.rows])
    write_json(d / "policy.json", traj.policy.to_json())
    if code == EXIT_OK and traj.stop_satisfied is False:
        code = EXIT_STOP_UNMET
    summary = dict(asdict(traj.final))
    summary.update({
        "steps_run": traj.final.step,
        "stop_satisfied": traj.stop_satisfied,
        "log_Z": traj.target.log_Z,
        "beta_log_Z": cfg.objective.beta * traj.target.log_Z,
        "target_entropy": entropy(traj.target.probs),
        "exit_code": code,
        "abort_reason": reason,
        "train_config": cfg.train.to_json(),
        "config": cfg.raw,
    })
    write_json(d / "summary.json", summary)
    return code


def run_verify(cfg: ExperimentConfig, seed: int, log_z_offset: float = 0.0) -> dict:
    """Identity suite: random policies plus the constructed optimum, per beta."""
    space, prior, r = cfg.space, cfg.prior, cfg.reward_values
    betas = cfg.verify_betas or (cfg.objective.beta,)
    rng = np.random.default_rng(seed)
    policies = [TabularPolicy(space, cfg.verify_sigma * rng.standard_normal(space.logits_shape))
                for _ in range(cfg.verify_n)]

    model = OptimalityModel(r, space)
    log_Z1 = partition_function(prior, model, 1.0) + log_z_offset
    at_post1 = from_distribution(space, gibbs_posterior(prior, r, 1.0).probs)
    # Jensen equality: the beta=1 posterior attains the bound
    elbo_tight = abs(log_Z1 - elbo(at_post1, prior, model))

    per_beta = []
    for beta in betas:
        target = gibbs_posterior(prior, r, beta)
        optimum = from_distribution(space, target.probs)
        reports = [verify_identities(p, prior, r, beta, log_z_offset) for p in policies + [optimum]]
        opt = reports[-1]
        per_beta.append({
            "beta": beta,
            "log_Z": opt.log_Z,
            "max_residual_eq7": max(x.residual_eq7 for x in reports),
            "max_residual_eq3_eq4": max(x.residual_eq3_eq4 for x in reports),
            "max_elbo_gap_violation": max(x.elbo_gap_violation for x in reports),
            "optimum_kl_to_target": kl(optimum.distribution(), target.probs),
            "optimum_objective_gap": abs(klrl_objective_exact(optimum, prior, r, beta) - beta * opt.log_Z),
        })

    max_eq7 = max(b["max_residual_eq7"] for b in per_beta)
    max_eq34 = max(b["max_residual_eq3_eq4"] for b in per_beta)
    max_viol = max(b["max_elbo_gap_violation"] for b in per_beta)
    max_opt = max(b["optimum_objective_gap"] for b in per_beta)
    passed = (max_eq7 < IDENTITY_TOL and max_eq34 < IDENTITY_TOL and max_viol <= ELBO_TOL
              and max_opt < OPTIMUM_TOL and elbo_tight < OPTIMUM_TOL)
    return {
        "n_policies": cfg.verify_n,
        "seed": seed,
        "betas": list(betas),
        "max_residual_eq7": max_eq7,
        "max_residual_eq3_eq4": max_eq34,
        "max_elbo_gap_violation": max_viol,
        "max_optimum_objective_gap": max_opt,
        "elbo_gap_at_posterior": elbo_tight,
        "tolerances": {"identity": IDENTITY_TOL, "optimum": OPTIMUM_TOL, "elbo": ELBO_TOL},
        "per_beta": per_beta,
        "passed": passed,
    }


def cmd_verify(cfg: ExperimentConfig, out: str | None = None, log_z_offset: float = 0.0) -> int:
    d = _out_dir(cfg, out)
    result = run_verify(cfg, cfg.train.seed, log_z_offset)
    write_json(d / "verify.json", result)
    return EXIT_OK if result["passed"] else EXIT_VERIFY


def cmd_sweep(cfg: ExperimentConfig, out: str | None = None, betas=None) -> int:
    d = _out_dir(cfg, out)
    betas = list(betas) if betas is not None else list(cfg.sweep_betas)
    try:
        rows = beta_sweep(cfg.prior, cfg.reward_values, betas)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    write_csv(d / "sweep.csv", ["beta", "expected_reward", "kl_to_prior", "entropy"],
              [(s.beta, s.expected_reward, s.kl_to_prior, s.entropy) for s in rows])
    svg = sweep_svg([s.beta for s in rows], {
        "expected_reward": [s.expected_reward for s in rows],
        "kl_to_prior": [s.kl_to_prior for s in rows],
    })
    (d / "sweep.svg").write_text(svg)
    return EXIT_OK


def _parse_betas(text: str) -> list[float]:
    try:
        return [float(b) for b in text.split(",") if b.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad beta list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="klrl", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, hlp in [
        ("enumerate", "write sequences.csv"),
        ("oracle", "write oracle.json (Gibbs posterior, log Z)"),
        ("train", "train and write metrics.csv, policy.json, summary.json"),
        ("verify", "check the exact identities, write verify.json"),
        ("sweep", "tempering sweep, write sweep.csv and sweep.svg"),
    ]:
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True, help="experiment JSON")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--seed", type=int, help="override train.seed")
        if name == "sweep":
            p.add_argument("--betas", type=_parse_betas, help="comma-separated, ascending")
    return parser


COMMANDS = {
    "enumerate": cmd_enumerate,
    "oracle": cmd_oracle,
    "train": cmd_train,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.out, args.betas)
        return COMMANDS[args.command](cfg, args.out)
    except ConfigError as e:
        log.error("invalid config: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
