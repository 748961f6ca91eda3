"""Helix: quantized nanopore base-calling on a processing-in-memory accelerator model."""

__version__ = "0.1.0"
