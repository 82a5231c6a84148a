"""Minimal measures and the financial value of weak information on multinomial lattices."""

__version__ = "0.1.0"
