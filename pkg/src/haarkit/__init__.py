"""Exact-summation toolkit for Haar systems, cocycles and KMS probabilities on shift spaces."""

__version__ = "0.1.0"
