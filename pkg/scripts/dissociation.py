"""Train pure RL, KL-regularised RL and GDC on one (prior, reward, beta) instance.

Writes the per-run metrics and a three-way outcome table (outcomes.csv) to the
output directory and prints the table. Pure RL should collapse (entropy near 0),
KL-regularised RL should land on the Gibbs posterior (reverse KL near 0) and GDC
on the same posterior from the other side (forward KL near 0).

    python scripts/dissociation.py --config configs/dissociation.json --out runs/dissociation
"""
import argparse
import copy
import json
import sys
from pathlib import Path

from klrl.cli import cmd_train
from klrl.config import parse_config
from klrl.serialize import write_csv

HEADER = ["objective", "steps", "entropy", "target_entropy", "kl_to_target",
          "fwd_kl_from_target", "argmax_mass", "expected_reward", "exit_code"]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--config", default=str(Path(__file__).parents[1] / "configs" / "dissociation.json"))
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    raw = json.loads(Path(args.config).read_text())
    runs = raw.pop("runs")
    out = Path(args.out or raw.get("out", "runs/dissociation"))
    rows = []
    for name, overrides in runs.items():
        cfg_raw = copy.deepcopy(raw)
        cfg_raw.update(overrides)
        cfg = parse_config(cfg_raw, Path(args.config).parent)
        code = cmd_train(cfg, str(out / name))
        s = json.loads((out / name / "summary.json").read_text())
        rows.append([name, s["steps_run"], s["entropy"], s["target_entropy"], s["kl_to_target"],
                     s["fwd_kl_from_target"], s["argmax_mass"], s["expected_reward"], code])
    write_csv(out / "outcomes.csv", HEADER, rows)

    width = max(len(h) for h in HEADER)
    print("  ".join(h.rjust(width) for h in HEADER))
    for row in rows:
        print("  ".join((f"{v:.4g}" if isinstance(v, float) else str(v)).rjust(width) for v in row))
    return max(r[-1] for r in rows)


if __name__ == "__main__":
    sys.exit(main())
