"""Failure-cascade advisory toolkit for grids with wind power."""

__version__ = "0.1.0"
