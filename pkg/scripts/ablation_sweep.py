#!/usr/bin/env python3
"""Ablation sweep: execute the same scripted world under several environment
variants (frozen day-0 corpus, disabled memory writes, one-shot submission,
fixed initial forecasts) and print a per-variant metrics table."""

import argparse
import dataclasses
import json
from pathlib import Path

from replaysim.config import load_config
from replaysim.runner import execute_run

VARIANTS = {
    "baseline": {},
    "freeze-corpus": {"freeze_corpus_at_day0": True},
    "no-memory-writes": {"disable_memory_writes": True},
    "one-shot": {"one_shot_mode": True},
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--world", type=Path, default=Path("toy-world"))
    args = parser.parse_args()
    args.world = args.world.resolve()

    config_path = args.world / "config.yaml"
    if not config_path.exists():
        parser.error(f"{config_path} not found; run make_toy_world.py first")

    print(f"{'variant':>18}  {'mean_bss':>9}  {'accuracy':>8}  resolved")
    for name, overrides in VARIANTS.items():
        config = dataclasses.replace(load_config(config_path), **overrides)
        run_dir = args.world / f"ablation-{name}"
        execute_run(config, run_dir)
        report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
        agent = sorted(report["final"])[0]
        final = report["final"][agent]
        resolved = sum(
            1 for _ in report["per_question_bss"].get(agent, {})
        )
        print(
            f"{name:>18}  {final['mean_bss']:+9.4f}  "
            f"{final['accuracy']:8.4f}  {resolved:8d}"
        )


if __name__ == "__main__":
    main()
