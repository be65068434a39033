"""Potts-regularized segmentation losses, discrete solvers and ADM training."""

__version__ = "0.1.0"
