"""Finite-volume solver for weakly compressible two-phase flow with an
HLLC-type path-conservative scheme and a benchmark harness."""

__version__ = "0.1.0"
