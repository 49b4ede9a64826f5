"""Command-line entry point: ``molrl {eval,reward,grpo-demo,datagen}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cot, grpo
from .evaluate import config_hash, evaluate_files, write_report
from .rewards import LANGUAGE_METRICS, STRUCTURAL_METRICS, TASKS, RewardMask, SchemaError, read_jsonl, score_batch

EXIT_OK, EXIT_SCHEMA, EXIT_PROVIDER = 0, 2, 3

log = logging.getLogger("molrl")


def _parse_mask(text: str | None) -> RewardMask:
    if text is None:
        return RewardMask()
    names = frozenset(n for n in text.split(",") if n)
    unknown = names - set(LANGUAGE_METRICS) - set(STRUCTURAL_METRICS)
    if unknown:
        raise SchemaError(f"unknown reward terms: {sorted(unknown)}")
    return RewardMask(names)


def cmd_eval(args) -> int:
    report = evaluate_files(args.pred, args.ref, args.task, workers=args.workers)
    csv_path, md_path = write_report(report, args.out)
    print(report.to_markdown(), end="")
    print(f"wrote {csv_path} and {md_path}")
    return EXIT_OK


def cmd_reward(args) -> int:
    with open(args.input, encoding="utf-8") as fh:
        records = read_jsonl(fh)
    if args.task:
        for rec in records:
            if isinstance(rec, dict):
                rec.setdefault("task", args.task)
    mask = _parse_mask(args.mask)
    scored = score_batch(records, mask, workers=args.workers)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for row in scored:
            fh.write(json.dumps({**row, "mask": mask.describe()}, sort_keys=True) + "\n")
    totals = [r["total"] for r in scored]
    mean = sum(totals) / len(totals) if totals else 0.0
    print(f"scored {len(scored)} records, mean reward {mean:.4f} -> {out}")
    return EXIT_OK


def load_demo_config(args) -> grpo.DemoConfig:
    data = json.loads(Path(args.config).read_text()) if args.config else {}
    cfg = grpo.DemoConfig.from_dict(data)
    overrides = {"seed": args.seed, "epochs": args.epochs, "kl_beta": args.beta, "learning_rate": args.lr}
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg.grpo, key, value)
    cfg.grpo.__post_init__()
    return cfg


def cmd_grpo_demo(args) -> int:
    try:
        cfg = load_demo_config(args)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    _, logs = grpo.run_copy_demo(cfg)
    text = grpo.log_to_csv(logs)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    first, last = logs[0], logs[-1]
    cfg_dict = {"grpo": vars(cfg.grpo), "warmup_steps": cfg.warmup_steps, "warmup_lr": cfg.warmup_lr, "window": cfg.window}
    print(f"config hash {config_hash(cfg_dict)}")
    print(f"epoch {first.epoch}: reward {first.mean_reward:.4f} format {first.format_rate:.3f}")
    print(f"epoch {last.epoch}: reward {last.mean_reward:.4f} format {last.format_rate:.3f} kl {last.kl:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_datagen(args) -> int:
    corpus = cot.read_corpus(args.corpus)
    if args.provider == "mock":
        provider = cot.MockProvider(drop_tags=args.drop_tags, seed=args.seed)
    else:
        provider = cot.HttpProvider.from_env(max_tokens=args.max_tokens, temperature=args.temperature)
    thresholds = cot.Thresholds(args.tau_lang, args.tau_struct)
    rejected = args.rejected or str(Path(args.out).with_suffix(".rejected.jsonl"))
    _, summary = cot.run_pipeline(corpus, args.task, provider, thresholds, args.out, rejected,
                                  max_in_flight=args.concurrency, resume=not args.no_resume)
    print(json.dumps(summary.as_dict(), sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="molrl", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--pred", required=True, help="JSONL with id and response")
    p.add_argument("--ref", required=True, help="JSONL with id and reference")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--out", required=True, help="output prefix; writes PREFIX.csv and PREFIX.md")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reward", help="batch reward scoring")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--task", choices=TASKS, help="default task for records without one")
    p.add_argument("--mask", help="comma-separated similarity terms to enable (ablation); empty string = format only")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("grpo-demo", help="GRPO on the bundled SELFIES-copy task")
    p.add_argument("--config", help="JSON file with DemoConfig keys (GRPO keys under 'grpo')")
    p.add_argument("--out", default="grpo_log.csv")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--lr", type=float)
    p.set_defaults(func=cmd_grpo_demo)

    p = sub.add_parser("datagen", help="build reasoning data from a molecule corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rejected")
    p.add_argument("--provider", choices=("mock", "http"), default="mock")
    p.add_argument("--drop-tags", type=float, default=0.0, help="mock only: fraction of completions without tags")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tau-lang", type=float, default=0.5)
    p.add_argument("--tau-struct", type=float, default=0.5)
    p.add_argument("--concurrency", type=int, default=4)
    p.add_argument("--max-tokens", type=int, default=1024)
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--no-resume", action="store_true")
    p.set_defaults(func=cmd_datagen)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except cot.ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
