"""Trainability of randomly initialized ReLU networks."""

__version__ = "0.1.0"
