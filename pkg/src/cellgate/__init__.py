"""Cellular gateway: AT-driven modem services exposed over HTTP, plus a virtual modem."""

__version__ = "0.1.0"
