"""Finite-window laboratory for dependent site percolation on the matching pair (Z², Z²*)."""

__version__ = "0.1.0"
