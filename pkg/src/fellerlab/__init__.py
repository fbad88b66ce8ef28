"""fellerlab: killed Brownian motion and its limit Feller semigroup, computed several ways."""

__all__ = ["__version__"]

__version__ = "0.1.0"
