"""Regression-based hypergraph learning: RH construction, spectral clustering, transduction."""

__version__ = "0.1.0"
