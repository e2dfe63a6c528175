from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

from ..model import NOWHERE, Location


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


REDUNDANT_UNSAFE = "W-REDUNDANT-UNSAFE"


@dataclass(frozen=True, order=True)
class Diagnostic:
    loc: Location
    code: str
    message: str = field(compare=False)
    severity: Severity = field(default=Severity.ERROR, compare=False)

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def __str__(self) -> str:
        return f"{self.loc}: {self.severity.value}[{self.code}]: {self.message}"


def error(code: str, message: str, loc: Location = NOWHERE) -> Diagnostic:
    return Diagnostic(loc, code, message, Severity.ERROR)


def warning(code: str, message: str, loc: Location = NOWHERE) -> Diagnostic:
    return Diagnostic(loc, code, message, Severity.WARNING)


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


class FrontendError(Exception):
    """Raised when a stage produces error diagnostics; carries all of them."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = sorted(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
