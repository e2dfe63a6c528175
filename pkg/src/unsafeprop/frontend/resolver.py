"""Name resolution and call classification."""
from __future__ import annotations

from dataclasses import replace
from typing import Optional

from ..model import (
    CallKind, CallSite, Corpus, FunctionRecord, ImplRecord, LocalDecl, Location,
    PackageUnit, Primitive, Statement, TypeKind, TypeRef, UnsafeBlock, UnsafeOpKind,
    concrete, walk,
)
from .diagnostics import Diagnostic, FrontendError, error


def resolve_names(corpus: Corpus) -> Corpus:
    """Bind every call site and global reference; raise FrontendError on failure."""
    resolver = _Resolver(corpus)
    packages = tuple(resolver.package(p) for p in corpus.packages)
    if resolver.problems:
        raise FrontendError(resolver.problems)
    return Corpus(packages)


def satisfies_bound(t: TypeRef, bound: Optional[str], corpus: Corpus,
                    caller: Optional[FunctionRecord] = None) -> bool:
    if bound is None:
        return True
    if t.kind is TypeKind.CONCRETE:
        return (bound, t.name) in corpus.impls
    if t.kind is TypeKind.DYNAMIC:
        return t.name == bound
    if t.kind is TypeKind.GENERIC:
        return caller is not None and caller.bound_of(t.name) == bound
    return False


class _Resolver:
    def __init__(self, corpus: Corpus):
        self.corpus = corpus
        self.problems: list[Diagnostic] = []

    def report(self, code: str, message: str, loc: Location):
        self.problems.append(error(code, message, loc))

    def visible(self, pkg: PackageUnit) -> set[str]:
        return {pkg.name, *pkg.dependencies}

    # -- declarations -------------------------------------------------------

    def package(self, pkg: PackageUnit) -> PackageUnit:
        self.pkg = pkg
        self.scope = self.visible(pkg)
        for iface in pkg.interfaces:
            for sig in iface.methods:
                for param in sig.params:
                    self.check_type(param.type, sig.loc, None)
        for impl in pkg.impls:
            self.check_impl(impl)
        functions = tuple(self.function(f) for f in pkg.functions)
        return replace(pkg, functions=functions)

    def check_type(self, t: Optional[TypeRef], loc: Location,
                   fn: Optional[FunctionRecord]) -> None:
        if t is None:
            return
        if t.kind is TypeKind.CONCRETE:
            owner = self.corpus.type_packages.get(t.name)
            if owner is None or owner not in self.scope:
                self.report("E-UNKNOWN-TYPE", f"unknown type {t.name}", loc)
        elif t.kind is TypeKind.DYNAMIC:
            self.check_interface(t.name, loc)
        elif t.kind is TypeKind.GENERIC:
            if fn is None or t.name not in fn.generic_names:
                self.report("E-UNKNOWN-TYPE", f"unknown generic variable {t.name}", loc)

    def check_interface(self, name: str, loc: Location) -> bool:
        iface = self.corpus.interfaces.get(name)
        if iface is None or iface.package not in self.scope:
            self.report("E-UNKNOWN-INTERFACE", f"unknown interface {name}", loc)
            return False
        return True

    def check_impl(self, impl: ImplRecord) -> None:
        others = [i for p in self.corpus.packages for i in p.impls
                  if (i.interface, i.type_name) == (impl.interface, impl.type_name)]
        if len(others) > 1 and others[0] is not impl:
            self.report("E-DUP-IMPL",
                        f"{impl.interface} implemented twice for {impl.type_name}", impl.loc)
        self.check_type(concrete(impl.type_name), impl.loc, None)
        if not self.check_interface(impl.interface, impl.loc):
            return
        iface = self.corpus.interfaces[impl.interface]
        if impl.declared_unsafe != iface.declared_unsafe:
            want = "must" if iface.declared_unsafe else "must not"
            self.report("E-UNSAFE-IMPL",
                        f"implementation of {iface.name} for {impl.type_name} {want} be unsafe",
                        impl.loc)
        methods = [self.corpus.functions[fid] for fid in impl.methods]
        names = sorted(m.name for m in methods)
        if names != sorted(s.name for s in iface.methods):
            self.report("E-IMPL-METHODS",
                        f"implementation of {iface.name} for {impl.type_name} must define "
                        f"exactly {sorted(s.name for s in iface.methods)}", impl.loc)
        for m in methods:
            sig = iface.method(m.name)
            if sig is not None and sig.declared_unsafe != m.declared_unsafe:
                self.report("E-IMPL-SIGNATURE",
                            f"{m.id} must match the unsafety of {iface.name}::{sig.name}", m.loc)
            if m.generics:
                self.report("E-IMPL-SIGNATURE", f"{m.id} may not declare generics", m.loc)

    def function(self, fn: FunctionRecord) -> FunctionRecord:
        seen_generics = set()
        for var, bound in fn.generics:
            if var in seen_generics:
                self.report("E-DUP-VAR", f"generic variable {var} declared twice", fn.loc)
            seen_generics.add(var)
            if bound is not None:
                self.check_interface(bound, fn.loc)
        self.fn = fn
        self.vars: dict[str, Optional[TypeRef]] = {}
        for param in fn.params:
            if param.is_self:
                if fn.container is None:
                    self.report("E-UNKNOWN-VAR", "self outside an implementation", fn.loc)
                    continue
                self.declare("self", concrete(fn.container), fn.loc)
            else:
                self.check_type(param.type, fn.loc, fn)
                self.declare(param.name, param.type, fn.loc)
        for stmt, _ in walk(fn.body):
            if isinstance(stmt, LocalDecl):
                self.check_type(stmt.type, stmt.loc, fn)
                self.declare(stmt.name, stmt.type, stmt.loc)
        return replace(fn, body=self.body(fn.body))

    def declare(self, name: str, t: Optional[TypeRef], loc: Location):
        if name in self.vars:
            self.report("E-DUP-VAR", f"variable {name} declared twice", loc)
        self.vars[name] = t

    # -- statements ---------------------------------------------------------

    def body(self, stmts: tuple[Statement, ...]) -> tuple[Statement, ...]:
        out = []
        for stmt in stmts:
            if isinstance(stmt, UnsafeBlock):
                out.append(replace(stmt, body=self.body(stmt.body)))
            elif isinstance(stmt, Primitive):
                out.append(self.primitive(stmt))
            elif isinstance(stmt, CallSite):
                out.append(self.call(stmt))
            else:
                out.append(stmt)
        return tuple(out)

    def primitive(self, prim: Primitive) -> Primitive:
        if prim.op is not UnsafeOpKind.GLOBAL_ACCESS:
            return prim
        name = prim.global_name or ""
        if "::" in name:  # already resolved
            return prim
        found = []
        for pkg_name in sorted(self.scope):
            g = self.corpus.package_map[pkg_name].global_named(name)
            if g is not None:
                found.append((pkg_name, g))
        if not found:
            self.report("E-UNKNOWN-GLOBAL", f"unknown global {name}", prim.loc)
            return prim
        if len(found) > 1:
            self.report("E-AMBIGUOUS-GLOBAL",
                        f"global {name} is declared in {', '.join(p for p, _ in found)}",
                        prim.loc)
            return prim
        pkg_name, g = found[0]
        if not g.mutable:
            self.report("E-IMMUTABLE-GLOBAL",
                        f"global {name} is immutable and cannot be accessed unsafely", prim.loc)
        return replace(prim, global_name=f"{pkg_name}::{name}")

    def call(self, call: CallSite) -> CallSite:
        if call.kind is not None:
            return call
        for arg in call.args:
            if arg not in self.vars:
                self.report("E-UNKNOWN-VAR", f"unknown variable {arg}", call.loc)
        if call.indirect:
            return self.indirect_call(call)
        if call.receiver is not None:
            if call.receiver not in self.vars:
                self.report("E-UNKNOWN-VAR", f"unknown variable {call.receiver}", call.loc)
                return call
            return self.method_call(call, self.vars[call.receiver], call.method or "")
        return self.path_call(call)

    def indirect_call(self, call: CallSite) -> CallSite:
        t = self.vars.get(call.receiver or "")
        if call.receiver not in self.vars:
            self.report("E-UNKNOWN-VAR", f"unknown variable {call.receiver}", call.loc)
        elif t is None or t.kind is not TypeKind.FN_VALUE:
            self.report("E-NOT-CALLABLE", f"{call.receiver} is not a function value", call.loc)
        return replace(call, kind=CallKind.INDIRECT)

    def method_call(self, call: CallSite, t: Optional[TypeRef], method: str) -> CallSite:
        if call.type_args:
            self.report("E-TYPE-ARITY", f"method {method} takes no type arguments", call.loc)
        if t is None or t.kind is TypeKind.FN_VALUE:
            self.report("E-NO-METHOD", f"no method {method} on {t}", call.loc)
            return call
        if t.kind is TypeKind.CONCRETE:
            found = self.corpus.methods_of_type(t.name, method)
            if not found:
                self.report("E-NO-METHOD", f"type {t.name} has no method {method}", call.loc)
                return call
            if len(found) > 1:
                self.report("E-AMBIGUOUS-METHOD",
                            f"method {method} of {t.name} is provided by "
                            + ", ".join(i for i, _ in found), call.loc)
                return call
            iface, target = found[0]
            return replace(call, kind=CallKind.STATIC, target=target, interface=iface)
        if t.kind is TypeKind.DYNAMIC:
            iface = self.corpus.interfaces.get(t.name)
            if iface is None or iface.method(method) is None:
                self.report("E-NO-METHOD", f"interface {t.name} has no method {method}", call.loc)
                return call
            return replace(call, kind=CallKind.DYNAMIC, interface=t.name)
        bound = self.fn.bound_of(t.name)
        iface = self.corpus.interfaces.get(bound) if bound else None
        if iface is None or iface.method(method) is None:
            self.report("E-NO-METHOD", f"generic {t.name} has no bound providing {method}",
                        call.loc)
            return call
        return replace(call, kind=CallKind.GENERIC_RECEIVER, interface=iface.name,
                       receiver_var=t.name)

    def path_call(self, call: CallSite) -> CallSite:
        path = call.path
        packages = self.corpus.package_map
        target_id = None
        if len(path) == 1:
            target_id = f"{self.pkg.name}::{path[0]}"
        elif len(path) == 2:
            head, name = path
            if head in self.scope:
                target_id = f"{head}::{name}"
            elif head in self.fn.generic_names:
                return self.method_call(call, TypeRef(TypeKind.GENERIC, head), name)
            elif self.corpus.type_packages.get(head) in self.scope:
                return self.method_call(call, concrete(head), name)
            elif head in packages:
                self.report("E-UNKNOWN-PACKAGE",
                            f"package {head} is not a dependency of {self.pkg.name}", call.loc)
                return call
        else:
            if path[0] in self.scope:
                target_id = "::".join(path)
                if (target_id not in self.corpus.functions
                        and self.corpus.type_packages.get(path[1]) == path[0]):
                    # a method the type gets from several interfaces
                    return self.method_call(call, concrete(path[1]), path[2])
            elif path[0] in packages:
                self.report("E-UNKNOWN-PACKAGE",
                            f"package {path[0]} is not a dependency of {self.pkg.name}", call.loc)
                return call
        target = self.corpus.functions.get(target_id) if target_id else None
        if target is None or (len(path) < 3 and target.container is not None):
            self.report("E-UNKNOWN-CALLEE", f"unknown function {'::'.join(path)}", call.loc)
            return call
        if len(call.type_args) != len(target.generics):
            self.report("E-TYPE-ARITY",
                        f"{target.id} expects {len(target.generics)} type arguments, "
                        f"got {len(call.type_args)}", call.loc)
            return call
        for t, (var, bound) in zip(call.type_args, target.generics):
            self.check_type(t, call.loc, self.fn)
            if not satisfies_bound(t, bound, self.corpus, self.fn):
                self.report("E-BOUND", f"{t} does not implement {bound} (for {var})", call.loc)
        kind = CallKind.GENERIC if target.generics else CallKind.STATIC
        return replace(call, kind=kind, target=target.id, interface=target.interface)
