"""Spectrally balanced generator splits of circulant and product Cayley graphs."""

__version__ = "0.1.0"
