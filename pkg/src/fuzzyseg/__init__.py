"""Fuzzy-label semantic segmentation: Gaussian-softened ground truth, a numpy U-Net, and metrics."""

__version__ = "0.1.0"
