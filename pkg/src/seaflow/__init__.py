"""Gravity-informed ship traffic flow prediction."""

__version__ = "0.1.0"
