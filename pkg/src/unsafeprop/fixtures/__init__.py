"""Bundled example corpora."""
from __future__ import annotations

from importlib import resources


def fixture_sources(name: str = "fig1") -> dict[str, str]:
    """Source files of a bundled corpus, keyed by file name."""
    root = resources.files(__name__) / name
    return {entry.name: entry.read_text(encoding="utf-8")
            for entry in sorted(root.iterdir(), key=lambda e: e.name)
            if entry.name.endswith(".ml")}


def fixture_path(name: str = "fig1"):
    return resources.files(__name__) / name
