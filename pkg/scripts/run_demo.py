#!/usr/bin/env python3
"""End-to-end determinism demo: generate a toy world, execute the scripted
run, replay it from the transcript, and verify the two run directories are
byte-identical. Prints the final metrics from report.json."""

import argparse
import json
import subprocess
import sys
from pathlib import Path

from replaysim.config import load_config
from replaysim.runner import execute_replay, execute_run

HERE = Path(__file__).resolve().parent


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--world", type=Path, default=Path("toy-world"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    # replaying re-reads the config copied into the run dir, so the dataset
    # paths recorded there must be absolute
    args.world = args.world.resolve()

    if not (args.world / "config.yaml").exists():
        subprocess.run(
            [sys.executable, str(HERE / "make_toy_world.py"),
             "--out", str(args.world), "--seed", str(args.seed)],
            check=True,
        )

    run_dir = args.world / "run"
    execute_run(load_config(args.world / "config.yaml"), run_dir)
    print(f"run finished: {run_dir}")

    replay_dir = args.world / "run-replay"
    result = execute_replay(run_dir, replay_dir)
    status = "identical" if result["identical"] else "DIVERGED"
    print(f"replay vs run: {status} ({result['compared']} files compared)")
    for diff in result["diffs"]:
        print(f"  diff: {diff}")

    report = json.loads((run_dir / "report.json").read_text(encoding="utf-8"))
    for agent, final in sorted(report["final"].items()):
        print(
            f"{agent}: mean_bss={final['mean_bss']:.4f} "
            f"accuracy={final['accuracy']:.4f}"
        )
    sys.exit(0 if result["identical"] else 1)


if __name__ == "__main__":
    main()
