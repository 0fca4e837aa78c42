"""Bitwise-repeatable K-Means, DBSCAN and Ward clustering."""

__version__ = "0.1.0"
