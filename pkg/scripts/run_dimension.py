#!/usr/bin/env python3
"""Run the dimension-witness suite; flags are forwarded to `lab dimension`."""
import sys

from metriclab.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["dimension", *sys.argv[1:]]))
