"""Agents that plan in order to collect data and learn object-property classifiers."""

__version__ = "0.1.0"

from pathlib import Path


def data_path(*parts: str) -> Path:
    """Path to a file shipped in the package's ``data`` directory."""
    return Path(__file__).parent.joinpath("data", *parts)
