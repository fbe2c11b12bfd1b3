"""File formats, bundled datasets, importers and exporters."""

from .netfile import Defaults, NetworkFile, SirSettings, parse_network, serialize_network
from .datasets import BUNDLED, load_bundled, load_network

__all__ = ["Defaults", "NetworkFile", "SirSettings", "parse_network", "serialize_network",
           "BUNDLED", "load_bundled", "load_network"]
