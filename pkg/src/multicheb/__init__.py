"""Best uniform approximation of monomials on semialgebraic domains."""
__version__ = "0.1.0"
