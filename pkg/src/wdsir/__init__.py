"""Security injection regions of tree-structured water distribution systems."""

__version__ = "0.1.0"
