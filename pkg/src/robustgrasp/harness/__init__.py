"""Synthetic data, corruption sweeps and reporting."""
