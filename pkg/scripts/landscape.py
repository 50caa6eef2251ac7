#!/usr/bin/env python3
"""Contour map of returns around one iteration's epoch checkpoints.

Thin wrapper over ``explorler visualize`` with the desk-scale defaults
(100 cloud samples, 20 evaluation episodes each).
"""
import sys

from explorler.cli import main

if __name__ == "__main__":
    argv = ["visualize", "--count", "100", "--episodes", "20", "--out", "runs/landscape"] + sys.argv[1:]
    sys.exit(main(argv))
