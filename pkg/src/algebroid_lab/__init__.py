"""Numerical lab for transitive Lie algebroids on tori and their secondary classes."""
__version__ = "0.1.0"
