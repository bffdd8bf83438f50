"""Engine-grounded chess reasoning data and evaluation toolkit."""

__version__ = "0.1.0"
