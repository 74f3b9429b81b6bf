"""Quasi-inversions in strictly starlike boundaries."""

__version__ = "0.1.0"
