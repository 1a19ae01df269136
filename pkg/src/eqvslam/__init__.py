"""Equivariant observer for monocular visual SLAM."""

__version__ = "0.1.0"
