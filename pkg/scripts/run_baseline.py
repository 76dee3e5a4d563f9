#!/usr/bin/env python3
"""Run the Euclidean k-NN baseline; flags are forwarded to `lab baseline`."""
import sys

from metriclab.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["baseline", *sys.argv[1:]]))
