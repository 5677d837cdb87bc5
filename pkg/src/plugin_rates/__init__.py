"""Plug-in classifiers with local polynomial and sieve regression estimates,
synthetic oracle laws with known regression function, and tools to measure
how fast their excess risk decays."""

__version__ = "0.1.0"
