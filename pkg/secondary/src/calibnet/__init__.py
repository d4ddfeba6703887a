"""Transformer camera-calibration network trained on horizonbench data files."""

__version__ = "0.1.0"
