"""Unsafe-usage discipline: the rules the subject compiler enforces."""
from __future__ import annotations

from ..model import Corpus, Statement, UnsafeBlock, unsafe_op_of
from .diagnostics import REDUNDANT_UNSAFE, Diagnostic, error, warning


def check_unsafe_discipline(corpus: Corpus) -> list[Diagnostic]:
    """Errors for unsafe operations outside an unsafe context, warnings for
    unsafe blocks that contain no unsafe operation.  Never raises."""
    found: list[Diagnostic] = []

    def visit(body: tuple[Statement, ...], unsafe_ctx: bool) -> bool:
        any_op = False
        for stmt in body:
            if isinstance(stmt, UnsafeBlock):
                inner = visit(stmt.body, True)
                if not inner:
                    found.append(warning(REDUNDANT_UNSAFE,
                                         "unnecessary unsafe block", stmt.loc))
                any_op |= inner
                continue
            op = unsafe_op_of(stmt, corpus)
            if op is None:
                continue
            any_op = True
            if not unsafe_ctx:
                what = getattr(stmt, "text", op.value)
                found.append(error("E-UNSAFE-OP",
                                   f"{op.value} ({what}) requires an unsafe block "
                                   "or unsafe function", stmt.loc))
        return any_op

    for fn in corpus.functions.values():
        visit(fn.body, fn.declared_unsafe)
    return sorted(found)
