#!/usr/bin/env python3
"""Run every experiment with one seed and write outputs under ./results/."""
import pathlib
import sys

from metriclab.cli import main

if __name__ == "__main__":
    seed = sys.argv[1] if len(sys.argv) > 1 else "0"
    out = pathlib.Path("results")
    out.mkdir(exist_ok=True)
    jobs = [
        ["consistency", "--mode", "proof", "--stages", "0..0", "--out", str(out / "consistency_proof.csv")],
        ["consistency", "--mode", "empirical", "--stages", "0..1", "--out", str(out / "consistency_empirical.csv")],
        ["baseline", "--out", str(out / "baseline.csv")],
        ["coverhart", "--out", str(out / "coverhart.json")],
        ["dimension", "--out", str(out / "dimension.json")],
        ["schedule", "--mode", "proof", "--depth", "1", "--out", str(out / "schedule.json")],
    ]
    for job in jobs:
        code = main([*job, "--seed", seed])
        if code != 0:
            raise SystemExit(code)
