"""Locally isoperimetric planar partitions: construction, verification and search."""

__version__ = "0.1.0"
