"""Desk-scale laboratory for fairness of homogeneous deep ensembles."""

__version__ = "0.1.0"
