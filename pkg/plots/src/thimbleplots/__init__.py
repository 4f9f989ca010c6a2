"""Render figures from the instability-analysis CLI's CSV artifacts."""

__version__ = "0.1.0"
