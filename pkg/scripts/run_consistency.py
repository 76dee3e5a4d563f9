#!/usr/bin/env python3
"""Run the consistency-failure stage table; flags are forwarded to `lab consistency`."""
import sys

from metriclab.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["consistency", *sys.argv[1:]]))
