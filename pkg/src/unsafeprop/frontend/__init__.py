"""Mini-language frontend: lexing, parsing, name resolution, discipline checks."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from ..model import Corpus
from .diagnostics import (
    REDUNDANT_UNSAFE, Diagnostic, FrontendError, Severity, has_errors,
)
from .discipline import check_unsafe_discipline
from .lexer import Token, TokenKind, tokenize
from .parser import parse_corpus, parse_package
from .printer import format_corpus, format_package
from .resolver import resolve_names

SOURCE_SUFFIX = ".ml"

__all__ = [
    "REDUNDANT_UNSAFE", "Diagnostic", "FrontendError", "Severity", "Token", "TokenKind",
    "check_unsafe_discipline", "collect_sources", "format_corpus", "format_package",
    "has_errors", "load_corpus", "parse_corpus", "parse_package", "resolve_names",
    "tokenize",
]


def collect_sources(paths: Iterable[str | Path]) -> dict[str, str]:
    """Read ``.ml`` files from directories (recursively) and explicit files."""
    files: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(path.rglob(f"*{SOURCE_SUFFIX}")))
        elif path.is_file():
            files.append(path)
        else:
            raise FileNotFoundError(str(path))
    return {str(f): f.read_text(encoding="utf-8") for f in files}


def load_corpus(sources: Mapping[str, str]) -> tuple[Corpus, list[Diagnostic]]:
    """Parse, resolve and discipline-check.

    Returns the resolved corpus and the discipline diagnostics; raises
    FrontendError if parsing or resolution fails.
    """
    corpus = resolve_names(parse_corpus(sources))
    return corpus, check_unsafe_discipline(corpus)
