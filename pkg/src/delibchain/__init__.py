"""Deliberation chain construction and evaluation for collaborative dialogue."""

__version__ = "0.1.0"
