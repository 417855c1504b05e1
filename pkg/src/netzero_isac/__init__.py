"""Backscatter sensing and communication performance toolkit."""

__version__ = "0.1.0"
