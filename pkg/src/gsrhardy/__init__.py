"""Ground-state representations and many-particle Hardy inequalities, checked numerically."""

__version__ = "0.1.0"
