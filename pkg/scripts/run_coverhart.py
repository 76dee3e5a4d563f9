#!/usr/bin/env python3
"""Run the 1-NN twice-Bayes checks; flags are forwarded to `lab coverhart`."""
import sys

from metriclab.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["coverhart", *sys.argv[1:]]))
