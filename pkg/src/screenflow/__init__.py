"""Discrete-event simulation and exact decision trees for cargo screening."""

__version__ = "0.1.0"
