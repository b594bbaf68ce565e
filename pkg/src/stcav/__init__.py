"""Self-triggered CBF coordination of connected automated vehicles at a merge."""

__version__ = "0.1.0"
