"""Pretty-printer emitting mini-language source from the model.

Items come out grouped (uses, types, globals, interfaces, impls, functions);
re-parsing the output of a parse of printed text reproduces the corpus.
"""
from __future__ import annotations

from ..model import (
    CallSite, Corpus, FunctionRecord, LocalDecl, Origin, PackageUnit, Param,
    Primitive, Statement, TypeRef, UnsafeBlock, UnsafeOpKind,
)

_PRIM_TEXT = {
    UnsafeOpKind.RAW_DEREF: "@deref_ptr",
    UnsafeOpKind.INLINE_ASM: "@asm",
    UnsafeOpKind.UNION_FIELD: "@union_field",
}


def _params(params: tuple[Param, ...]) -> str:
    return ", ".join("self" if p.is_self else f"{p.name}: {p.type}" for p in params)


def _type(t: TypeRef) -> str:
    return str(t)


def _stmt(stmt: Statement, depth: int) -> list[str]:
    pad = "    " * depth
    if isinstance(stmt, LocalDecl):
        return [f"{pad}let {stmt.name}: {_type(stmt.type)};"]
    if isinstance(stmt, UnsafeBlock):
        if not stmt.body:
            return [f"{pad}unsafe {{ }}"]
        lines = [f"{pad}unsafe {{"]
        for inner in stmt.body:
            lines.extend(_stmt(inner, depth + 1))
        return lines + [f"{pad}}}"]
    if isinstance(stmt, Primitive):
        if stmt.op is UnsafeOpKind.GLOBAL_ACCESS:
            verb = "@write_global" if stmt.write else "@read_global"
            return [f"{pad}{verb} {(stmt.global_name or '').split('::')[-1]};"]
        return [f"{pad}{_PRIM_TEXT[stmt.op]};"]
    assert isinstance(stmt, CallSite)
    if stmt.indirect:
        return [f"{pad}indirect {stmt.receiver};"]
    args = ", ".join(stmt.args)
    if stmt.receiver is not None:
        return [f"{pad}{stmt.receiver}.{stmt.method}({args});"]
    targs = ""
    if stmt.type_args:
        targs = "::<" + ", ".join(_type(t) for t in stmt.type_args) + ">"
    return [f"{pad}{'::'.join(stmt.path)}{targs}({args});"]


def format_function(fn: FunctionRecord, depth: int = 0) -> list[str]:
    pad = "    " * depth
    if fn.origin is Origin.EXTERNAL:
        return [f'{pad}extern "{fn.abi}" fn {fn.name}({_params(fn.params)});']
    head = "unsafe fn" if fn.declared_unsafe else "fn"
    generics = ""
    if fn.generics:
        generics = "<" + ", ".join(v if b is None else f"{v}: {b}" for v, b in fn.generics) + ">"
    sig = f"{pad}{head} {fn.name}{generics}({_params(fn.params)})"
    if not fn.body:
        return [sig + " { }"]
    lines = [sig + " {"]
    for stmt in fn.body:
        lines.extend(_stmt(stmt, depth + 1))
    return lines + [f"{pad}}}"]


def format_package(pkg: PackageUnit) -> str:
    lines = [f"package {pkg.name};"]
    lines += [f"use {d};" for d in pkg.dependencies]
    lines += [f"type {t.name};" for t in pkg.types]
    lines += [f"global {'mut ' if g.mutable else ''}{g.name};" for g in pkg.globals]
    for iface in pkg.interfaces:
        head = "unsafe interface" if iface.declared_unsafe else "interface"
        lines.append(f"{head} {iface.name} {{")
        for sig in iface.methods:
            kw = "unsafe fn" if sig.declared_unsafe else "fn"
            lines.append(f"    {kw} {sig.name}({_params(sig.params)});")
        lines.append("}")
    functions = {f.id: f for f in pkg.functions}
    for impl in pkg.impls:
        head = "unsafe impl" if impl.declared_unsafe else "impl"
        lines.append(f"{head} {impl.interface} for {impl.type_name} {{")
        for fid in impl.methods:
            lines.extend(format_function(functions[fid], 1))
        lines.append("}")
    for fn in pkg.functions:
        if fn.container is None:
            lines.extend(format_function(fn))
    return "\n".join(lines) + "\n"


def format_corpus(corpus: Corpus) -> dict[str, str]:
    return {f"{p.name}.ml": format_package(p) for p in corpus.packages}
