"""Synthesize GUI-glitch screenshots, detect them with a small CNN, and localize them with saliency maps."""

__version__ = "0.1.0"
