"""Spatial sampling strategies for partial-measurement GPR prediction of grid test data."""
__version__ = "0.1.0"
