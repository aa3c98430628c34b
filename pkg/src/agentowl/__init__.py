"""Hierarchical option learning with a product-of-experts abstract world model."""

__version__ = "0.1.0"
