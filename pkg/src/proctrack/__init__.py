"""Step-aware procedural-text entity tracking: encoder, decoding, and metrics."""

__version__ = "0.1.0"
