#!/usr/bin/env python3
"""End-to-end walkthrough on the bundled four-robot scenario.

Validates the scenario, prints the distance and constrained-transition
tables, simulates one arc under each branch policy, computes and checks the
recurrence certificate, and finishes with the grid sweep that compares the
empirical hitting times against the predicted bound.  Artifacts (trace CSV,
output plot, certificate and sweep reports) land in --out.
"""

from __future__ import annotations

import argparse
from pathlib import Path

from buchirec import cli
from buchirec.data import ROBOTS4_YAML


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--scenario", type=Path, default=ROBOTS4_YAML)
    parser.add_argument("--out", type=Path, default=Path("out"))
    args = parser.parse_args()
    scenario = str(args.scenario)
    out = str(args.out)

    steps: list[list[str]] = [
        ["validate", "--scenario", scenario],
        ["distances", "--scenario", scenario],
        ["constrain", "--scenario", scenario],
        ["synthesize", "--scenario", scenario],
        ["simulate", "--scenario", scenario, "--out", out, "--policy", "scripted:s6"],
        ["simulate", "--scenario", scenario, "--out", out, "--policy", "random:11"],
        ["enumerate-runs", "--scenario", scenario, "--depth", "4"],
        ["certify", "--scenario", scenario, "--out", out],
        ["ugr-sweep", "--scenario", scenario, "--out", out],
    ]
    for argv in steps:
        print(f"\n$ buchirec {' '.join(argv)}")
        code = cli.main(argv)
        if code != 0:
            print(f"step failed with exit code {code}")
            return code
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
