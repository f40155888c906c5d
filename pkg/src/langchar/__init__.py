"""Language-directed control of a simulated 2-D character."""

__version__ = "0.1.0"
