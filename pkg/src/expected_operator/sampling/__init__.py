"""Coefficient samples from Monte Carlo and Sobol sources."""
