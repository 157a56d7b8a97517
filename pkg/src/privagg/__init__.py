"""Privacy-aware aggregation of household batteries by distributed projected
online gradient descent."""

__version__ = "0.1.0"
