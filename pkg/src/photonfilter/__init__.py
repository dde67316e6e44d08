"""Cavity-array photon-number filter: projection, counting, loss detection, and the non-ideal cavity model."""

__version__ = "0.1.0"
