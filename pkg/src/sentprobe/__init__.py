"""Probe sentence embeddings by decoding them back into text."""

__version__ = "0.1.0"
