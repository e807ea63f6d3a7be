"""Adaptive-step-size Langevin samplers and their biased stationary densities."""

__version__ = "0.1.0"
