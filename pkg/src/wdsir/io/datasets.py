"""Bundled case-study networks."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .netfile import NetworkFile, parse_network

BUNDLED = ("system1", "system2")


def bundled_text(name: str) -> str:
    if name not in BUNDLED:
        raise KeyError(f"no bundled network {name!r}; choose from {', '.join(BUNDLED)}")
    return resources.files("wdsir.data").joinpath(f"{name}.yaml").read_text(encoding="utf-8")


def load_bundled(name: str) -> NetworkFile:
    return parse_network(bundled_text(name))


def load_network(ref: str) -> NetworkFile:
    """Load a bundled network by name, or a network file by path."""
    if ref in BUNDLED and not Path(ref).exists():
        return load_bundled(ref)
    return parse_network(Path(ref).read_text(encoding="utf-8"))
