"""Decentralized STL controller synthesis with zonotopic tubes and parametric contracts."""

__version__ = "0.1.0"
