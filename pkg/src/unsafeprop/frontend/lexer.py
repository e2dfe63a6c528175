"""Tokenizer for the package mini-language."""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from ..model import Location
from .diagnostics import FrontendError, error


class TokenKind(enum.Enum):
    KEYWORD = "keyword"
    IDENT = "identifier"
    PUNCT = "punctuation"
    ABI = "abi-string"


KEYWORDS = frozenset({
    "package", "use", "type", "global", "mut", "unsafe", "interface", "impl",
    "for", "extern", "fn", "self", "dyn", "fnptr", "let", "indirect",
})

PRIMITIVES = frozenset({
    "@deref_ptr", "@asm", "@union_field", "@read_global", "@write_global",
})

# Longest alternatives first so "::" wins over ":".
_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<abi>"[^"\n]*")
  | (?P<prim>@[A-Za-z][A-Za-z0-9_]*)
  | (?P<word>[A-Za-z][A-Za-z0-9_]*)
  | (?P<punct>::|[;{}()<>,:.])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    lexeme: str
    line: int
    column: int
    file: str = "<memory>"

    @property
    def loc(self) -> Location:
        return Location(self.file, self.line, self.column)

    def __str__(self) -> str:
        return self.lexeme


def tokenize(source: str, file: str = "<memory>") -> list[Token]:
    """Split ``source`` into tokens, dropping whitespace and comments.

    Raises FrontendError listing every character outside the alphabet.
    """
    tokens: list[Token] = []
    problems = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            problems.append(error("E-LEX", f"unexpected character {source[pos]!r}",
                                  Location(file, line, col)))
            pos += 1
            continue
        group, text = m.lastgroup, m.group()
        if group == "prim" and text not in PRIMITIVES:
            problems.append(error("E-LEX", f"unknown primitive {text!r}",
                                  Location(file, line, col)))
        elif group == "abi":
            tokens.append(Token(TokenKind.ABI, text, line, col, file))
        elif group == "prim":
            tokens.append(Token(TokenKind.KEYWORD, text, line, col, file))
        elif group == "word":
            kind = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENT
            tokens.append(Token(kind, text, line, col, file))
        elif group == "punct":
            tokens.append(Token(TokenKind.PUNCT, text, line, col, file))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    if problems:
        raise FrontendError(problems)
    return tokens
