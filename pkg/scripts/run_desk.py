#!/usr/bin/env python3
"""Run the desk-scale experiments end to end through the CLI.

Writes under OUT (default ./out_desk): the GVWY landscape, the single-PRSH
convergence runs, a co-evolution session and the RQA of its trajectory.
"""

import argparse
import sys
import tempfile
from pathlib import Path

from przi import cli

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

STEPS = [
    ("landscape", "landscape_gvwy_desk.ini", "landscape"),
    ("session", "single_prsh_gvwy_desk.ini", "single_prsh"),
    ("session", "coevolve_zero_desk.ini", "coevolve"),
    ("impact-scenario", "impact_buyer.ini", "impact"),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", nargs="?", type=Path, default=Path("out_desk"))
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    extra = ["--seed", str(args.seed)] if args.seed is not None else []
    for verb, cfg, sub in STEPS:
        print(f"== {verb} {cfg}", flush=True)
        if cli.main([verb, str(CONFIGS / cfg), str(args.out / sub), *extra]):
            return 1
    traj = (args.out / "coevolve" / "run_00" / "strategies.csv").resolve()
    with tempfile.NamedTemporaryFile("w", suffix=".ini", delete=False) as fh:
        fh.write(f"[rqa]\ntrajectory = {traj}\nper_component = 0.05\nv_min = 2\n")
    print("== rqa coevolve trajectory", flush=True)
    return cli.main(["rqa", fh.name, str(args.out / "rqa")])


if __name__ == "__main__":
    sys.exit(main())
