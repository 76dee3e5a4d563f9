#!/usr/bin/env python3
"""Derive and print a stage schedule; flags are forwarded to `lab schedule`."""
import sys

from metriclab.cli import main

if __name__ == "__main__":
    raise SystemExit(main(["schedule", *sys.argv[1:]]))
