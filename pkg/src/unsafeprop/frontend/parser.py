"""Recursive-descent parser producing the facts model.

One source file holds exactly one package.  Syntax errors stop the file at
the first problem; corpus-level errors (duplicates, unknown dependencies,
dependency cycles) are collected across all files.
"""
from __future__ import annotations

from dataclasses import replace
from typing import Iterable, Mapping, Optional

import networkx as nx

from ..model import (
    ABIS, FN_VALUE, CallSite, Corpus, FunctionRecord, GlobalRecord, ImplRecord,
    InterfaceRecord, LocalDecl, Location, MethodSig, Origin, PackageUnit, Param,
    Primitive, Statement, TypeDecl, TypeRef, UnsafeBlock, UnsafeOpKind, concrete,
    dynamic, generic_var,
)
from .diagnostics import Diagnostic, FrontendError, error
from .lexer import Token, TokenKind, tokenize

_PRIMS = {
    "@deref_ptr": UnsafeOpKind.RAW_DEREF,
    "@asm": UnsafeOpKind.INLINE_ASM,
    "@union_field": UnsafeOpKind.UNION_FIELD,
    "@read_global": UnsafeOpKind.GLOBAL_ACCESS,
    "@write_global": UnsafeOpKind.GLOBAL_ACCESS,
}


class _SyntaxError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic


class Parser:
    def __init__(self, tokens: list[Token], file: str = "<memory>"):
        self.tokens = tokens
        self.file = file
        self.pos = 0
        self.package = ""
        self._generics: tuple[str, ...] = ()

    # -- token helpers ------------------------------------------------------

    def peek(self, offset: int = 0) -> Optional[Token]:
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def at(self, lexeme: str, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.lexeme == lexeme and tok.kind is not TokenKind.ABI

    def at_ident(self, offset: int = 0) -> bool:
        tok = self.peek(offset)
        return tok is not None and tok.kind is TokenKind.IDENT

    def _loc(self) -> Location:
        tok = self.peek()
        if tok is not None:
            return tok.loc
        if self.tokens:
            last = self.tokens[-1]
            return Location(self.file, last.line, last.column + len(last.lexeme))
        return Location(self.file, 1, 1)

    def fail(self, expected: str):
        tok = self.peek()
        found = "end of file" if tok is None else repr(tok.lexeme)
        raise _SyntaxError(error("E-SYNTAX", f"expected {expected}, found {found}", self._loc()))

    def expect(self, lexeme: str) -> Token:
        if not self.at(lexeme):
            self.fail(repr(lexeme))
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def accept(self, lexeme: str) -> bool:
        if self.at(lexeme):
            self.pos += 1
            return True
        return False

    def ident(self) -> Token:
        if not self.at_ident():
            self.fail("identifier")
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    # -- grammar ------------------------------------------------------------

    def parse_package(self) -> PackageUnit:
        loc = self._loc()
        self.expect("package")
        self.package = self.ident().lexeme
        self.expect(";")
        deps: list[str] = []
        functions: list[FunctionRecord] = []
        interfaces: list[InterfaceRecord] = []
        impls: list[ImplRecord] = []
        globals_: list[GlobalRecord] = []
        types: list[TypeDecl] = []
        while self.peek() is not None:
            item_loc = self._loc()
            if self.accept("use"):
                deps.append(self.ident().lexeme)
                self.expect(";")
            elif self.accept("type"):
                types.append(TypeDecl(self.ident().lexeme, item_loc))
                self.expect(";")
            elif self.accept("global"):
                mutable = self.accept("mut")
                globals_.append(GlobalRecord(self.ident().lexeme, mutable, item_loc))
                self.expect(";")
            elif self.accept("extern"):
                functions.append(self.parse_extern(item_loc))
            else:
                is_unsafe = self.accept("unsafe")
                if self.accept("interface"):
                    interfaces.append(self.parse_interface(is_unsafe, item_loc))
                elif self.accept("impl"):
                    impl, methods = self.parse_impl(is_unsafe, item_loc)
                    impls.append(impl)
                    functions.extend(methods)
                elif self.at("fn"):
                    functions.append(self.parse_fn(is_unsafe, item_loc))
                else:
                    self.fail("an item")
        functions, impls = _qualify_clashing_methods(functions, impls)
        return PackageUnit(self.package, tuple(deps), tuple(functions), tuple(interfaces),
                           tuple(impls), tuple(globals_), tuple(types), loc)

    def parse_extern(self, loc: Location) -> FunctionRecord:
        tok = self.peek()
        if tok is None or tok.kind is not TokenKind.ABI:
            self.fail("ABI string")
        abi = tok.lexeme.strip('"')
        if abi not in ABIS:
            raise _SyntaxError(error("E-SYNTAX", f"unknown ABI {tok.lexeme}", tok.loc))
        self.pos += 1
        self.expect("fn")
        name = self.ident().lexeme
        params = self.parse_params()
        self.expect(";")
        return FunctionRecord(id=f"{self.package}::{name}", package=self.package, name=name,
                              declared_unsafe=True, params=params, origin=Origin.EXTERNAL,
                              abi=abi, loc=loc)

    def parse_interface(self, is_unsafe: bool, loc: Location) -> InterfaceRecord:
        name = self.ident().lexeme
        self.expect("{")
        sigs = []
        while not self.accept("}"):
            sig_loc = self._loc()
            sig_unsafe = self.accept("unsafe")
            self.expect("fn")
            sig_name = self.ident().lexeme
            params = self.parse_params()
            self.expect(";")
            sigs.append(MethodSig(sig_name, sig_unsafe, params, sig_loc))
        return InterfaceRecord(name, self.package, is_unsafe, tuple(sigs), loc=loc)

    def parse_impl(self, is_unsafe: bool, loc: Location):
        interface = self.ident().lexeme
        self.expect("for")
        type_name = self.ident().lexeme
        self.expect("{")
        methods = []
        while not self.accept("}"):
            fn_loc = self._loc()
            fn_unsafe = self.accept("unsafe")
            methods.append(self.parse_fn(fn_unsafe, fn_loc, container=type_name,
                                         interface=interface))
        impl = ImplRecord(interface, type_name, self.package, is_unsafe,
                          tuple(m.id for m in methods), loc=loc)
        return impl, methods

    def parse_fn(self, is_unsafe: bool, loc: Location, container: Optional[str] = None,
                 interface: Optional[str] = None) -> FunctionRecord:
        self.expect("fn")
        name = self.ident().lexeme
        generics = []
        if self.accept("<"):
            while True:
                var = self.ident().lexeme
                bound = self.ident().lexeme if self.accept(":") else None
                generics.append((var, bound))
                if not self.accept(","):
                    break
            self.expect(">")
        self._generics = tuple(v for v, _ in generics)
        params = self.parse_params()
        body = self.parse_block()
        self._generics = ()
        prefix = f"{self.package}::{container}" if container else self.package
        return FunctionRecord(id=f"{prefix}::{name}", package=self.package, name=name,
                              declared_unsafe=is_unsafe, generics=tuple(generics),
                              params=params, body=body, container=container,
                              interface=interface, loc=loc)

    def parse_params(self) -> tuple[Param, ...]:
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                if self.accept("self"):
                    params.append(Param("self", None))
                else:
                    pname = self.ident().lexeme
                    self.expect(":")
                    params.append(Param(pname, self.parse_type()))
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(params)

    def parse_type(self) -> TypeRef:
        if self.accept("dyn"):
            return dynamic(self.ident().lexeme)
        if self.accept("fnptr"):
            return FN_VALUE
        name = self.ident().lexeme
        return generic_var(name) if name in self._generics else concrete(name)

    def parse_block(self) -> tuple[Statement, ...]:
        self.expect("{")
        stmts = []
        while not self.accept("}"):
            if self.peek() is None:
                self.fail("'}'")
            stmts.append(self.parse_stmt())
        return tuple(stmts)

    def parse_stmt(self) -> Statement:
        loc = self._loc()
        tok = self.peek()
        if self.accept("let"):
            name = self.ident().lexeme
            self.expect(":")
            decl = LocalDecl(name, self.parse_type(), loc)
            self.expect(";")
            return decl
        if self.accept("unsafe"):
            return UnsafeBlock(self.parse_block(), loc)
        if tok is not None and tok.lexeme in _PRIMS and tok.kind is TokenKind.KEYWORD:
            self.pos += 1
            global_name = None
            if tok.lexeme.endswith("_global"):
                global_name = self.ident().lexeme
            self.expect(";")
            return Primitive(_PRIMS[tok.lexeme], global_name,
                             tok.lexeme == "@write_global", loc)
        if self.accept("indirect"):
            var = self.ident().lexeme
            self.expect(";")
            return CallSite(receiver=var, indirect=True, loc=loc)
        call = self.parse_call(loc)
        self.expect(";")
        return call

    def parse_call(self, loc: Location) -> CallSite:
        if (self.at_ident() or self.at("self")) and self.at(".", 1):
            receiver = self.tokens[self.pos].lexeme
            self.pos += 2
            method = self.ident().lexeme
            return CallSite(receiver=receiver, method=method, args=self.parse_args(), loc=loc)
        path = [self.ident().lexeme]
        while len(path) < 3 and self.at("::") and self.at_ident(1):
            self.pos += 1
            path.append(self.ident().lexeme)
        type_args = []
        if self.at("::") and self.at("<", 1):
            self.pos += 2
            while True:
                type_args.append(self.parse_type())
                if not self.accept(","):
                    break
            self.expect(">")
        return CallSite(path=tuple(path), type_args=tuple(type_args),
                        args=self.parse_args(), loc=loc)

    def parse_args(self) -> tuple[str, ...]:
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                if self.accept("self"):
                    args.append("self")
                else:
                    args.append(self.ident().lexeme)
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(args)


def _qualify_clashing_methods(functions, impls):
    """Give ``pkg::Type::Iface::m`` ids to methods that one type gets from
    several interfaces under the same name; other ids stay ``pkg::Type::m``."""
    providers: dict[str, set] = {}
    for f in functions:
        if f.container is not None:
            providers.setdefault(f.id, set()).add(f.interface)
    clashing = {fid for fid, ifaces in providers.items() if len(ifaces) > 1}
    if not clashing:
        return functions, impls

    def fix(fid: str, iface: str) -> str:
        if fid not in clashing:
            return fid
        head, name = fid.rsplit("::", 1)
        return f"{head}::{iface}::{name}"

    functions = [replace(f, id=fix(f.id, f.interface)) if f.container else f for f in functions]
    impls = [replace(i, methods=tuple(fix(m, i.interface) for m in i.methods)) for i in impls]
    return functions, impls


def parse_package(source: str, file: str = "<memory>") -> PackageUnit:
    tokens = tokenize(source, file)
    parser = Parser(tokens, file)
    try:
        return parser.parse_package()
    except _SyntaxError as exc:
        raise FrontendError([exc.diagnostic]) from None


def parse_corpus(sources: Mapping[str, str] | Iterable[tuple[str, str]]) -> Corpus:
    """Parse named source files into a corpus.

    Raises FrontendError with every diagnostic found across all files.
    """
    items = sources.items() if isinstance(sources, Mapping) else sources
    problems: list[Diagnostic] = []
    packages: list[PackageUnit] = []
    for name, text in sorted(items):
        try:
            packages.append(parse_package(text, name))
        except FrontendError as exc:
            problems.extend(exc.diagnostics)
    problems.extend(_check_corpus(packages))
    if problems:
        raise FrontendError(problems)
    return Corpus(tuple(packages))


def _check_corpus(packages: list[PackageUnit]) -> list[Diagnostic]:
    problems = []
    seen_pkg: dict[str, PackageUnit] = {}
    seen_fn: set[str] = set()
    seen_iface: set[str] = set()
    seen_type: set[str] = set()
    for pkg in packages:
        if pkg.name in seen_pkg:
            problems.append(error("E-DUP-PACKAGE", f"package {pkg.name} declared twice", pkg.loc))
            continue
        seen_pkg[pkg.name] = pkg
        for f in pkg.functions:
            if f.id in seen_fn:
                problems.append(error("E-DUP-FUNCTION", f"function {f.id} declared twice", f.loc))
            seen_fn.add(f.id)
        for i in pkg.interfaces:
            if i.name in seen_iface:
                problems.append(error("E-DUP-INTERFACE", f"interface {i.name} declared twice",
                                      i.loc))
            seen_iface.add(i.name)
            sig_names = [s.name for s in i.methods]
            for s in i.methods:
                if sig_names.count(s.name) > 1:
                    problems.append(error("E-DUP-FUNCTION",
                                          f"method {i.name}::{s.name} declared twice", s.loc))
                    break
        for t in pkg.types:
            if t.name in seen_type or t.name in seen_iface:
                problems.append(error("E-DUP-TYPE", f"type {t.name} declared twice", t.loc))
            seen_type.add(t.name)
        names = [g.name for g in pkg.globals]
        for g in pkg.globals:
            if names.count(g.name) > 1:
                problems.append(error("E-DUP-GLOBAL", f"global {g.name} declared twice", g.loc))
                break
    graph = nx.DiGraph()
    for pkg in seen_pkg.values():
        graph.add_node(pkg.name)
        for dep in pkg.dependencies:
            if dep not in seen_pkg:
                problems.append(error("E-UNKNOWN-PACKAGE",
                                      f"{pkg.name} uses unknown package {dep}", pkg.loc))
            else:
                graph.add_edge(pkg.name, dep)
    cyclic = [sorted(c) for c in nx.strongly_connected_components(graph)
              if len(c) > 1 or graph.has_edge(next(iter(c)), next(iter(c)))]
    for cycle in sorted(cyclic):
        anchor = seen_pkg[cycle[0]]
        problems.append(error("E-DEP-CYCLE", "dependency cycle through " + ", ".join(cycle),
                              anchor.loc))
    return problems
