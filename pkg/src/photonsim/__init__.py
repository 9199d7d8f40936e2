"""Exact simulation of small linear-optical circuits with loss and distinguishability."""

__version__ = "0.1.0"
