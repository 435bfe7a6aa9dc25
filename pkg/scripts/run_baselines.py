#!/usr/bin/env python3
"""Baseline comparison experiment: host a simulation server on a UNIX socket
and run each reference policy (abstainer, uniform-top-k, keyword-frequency)
against its own fresh copy of the same world, over the wire protocol only.
Prints one result line per policy plus the closed-form check for
uniform-top-k."""

import argparse
import sys
from pathlib import Path

from replaysim.config import load_config
from replaysim.runner import build_environment

sdk_src = Path(__file__).resolve().parent.parent / "sdk" / "src"
if sdk_src.exists():
    sys.path.insert(0, str(sdk_src))

from replaysim_sdk import (  # noqa: E402
    ClientSession,
    POLICIES,
    UniformTopK,
    run_baseline,
    uniform_top_k_expected_bss,
)
from replaysim_sdk.cli import load_question_specs  # noqa: E402


def run_policy(name, agent, config, out_root):
    run_dir = out_root / f"baseline-{name}"
    engine, server = build_environment(config, run_dir)
    socket_path = out_root / f"{name}.sock"
    handle = server.serve_socket(socket_path)
    try:
        specs = load_question_specs(config.questions_path)
        with ClientSession.connect(socket_path) as session:
            return run_baseline(agent, session, specs, max_days=365)
    finally:
        handle.stop()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--world", type=Path, default=Path("toy-world"))
    parser.add_argument("--k", type=int, default=3, help="uniform-top-k candidate count")
    args = parser.parse_args()
    args.world = args.world.resolve()

    config_path = args.world / "config.yaml"
    if not config_path.exists():
        parser.error(f"{config_path} not found; run make_toy_world.py first")
    config = load_config(config_path)

    agents = {
        "abstainer": POLICIES["abstainer"](),
        "uniform-top-k": UniformTopK(k=args.k),
        "keyword-frequency": POLICIES["keyword-frequency"](),
    }
    for name, agent in agents.items():
        result = run_policy(name, agent, config, args.world)
        print(
            f"{name:>18}: mean_bss={result.final_mean_bss:+.4f} "
            f"accuracy={result.final_accuracy:.4f} "
            f"resolved={result.num_resolved} days={result.days}"
        )
    expected = uniform_top_k_expected_bss(args.k)
    print(
        f"closed form: uniform-top-{args.k} scores {expected:+.4f} "
        "whenever the truth is among the k candidates"
    )


if __name__ == "__main__":
    main()
