"""GRPO on the toy SELFIES-copy task at several KL weights.

Writes one learning-curve CSV per beta into the output directory and prints
the first/last epoch of each run.

    python3 scripts/run_grpo_demo.py --out runs/grpo --betas 0 0.04 10
"""

import argparse
from pathlib import Path

from molrl.grpo import DemoConfig, GrpoConfig, log_to_csv, run_copy_demo


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/grpo")
    parser.add_argument("--betas", type=float, nargs="+", default=[0.0, 0.04, 10.0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=15)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    print("beta,epoch1_reward,final_reward,final_format,final_kl")
    for beta in args.betas:
        cfg = DemoConfig(grpo=GrpoConfig(kl_beta=beta, seed=args.seed, epochs=args.epochs))
        _, logs = run_copy_demo(cfg)
        (out / f"beta_{beta:g}.csv").write_text(log_to_csv(logs))
        first, last = logs[0], logs[-1]
        print(f"{beta:g},{first.mean_reward:.4f},{last.mean_reward:.4f},{last.format_rate:.4f},{last.kl:.4f}")


if __name__ == "__main__":
    main()
