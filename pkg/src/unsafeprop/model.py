"""Program-facts model shared by the frontend, graph builder and analyses.

Every record is an immutable dataclass.  Source locations are carried for
diagnostics but excluded from equality so that structurally identical
programs compare equal regardless of formatting.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Optional, Sequence, Union


class ModelError(Exception):
    pass


class UnboundVariableError(ModelError):
    pass


class ArityError(ModelError):
    pass


@dataclass(frozen=True, order=True)
class Location:
    file: str = "<memory>"
    line: int = 0
    column: int = 0

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


NOWHERE = Location()


# ---------------------------------------------------------------------------
# Types and substitutions


class TypeKind(enum.Enum):
    CONCRETE = "concrete"
    GENERIC = "generic"
    DYNAMIC = "dyn"
    FN_VALUE = "fnptr"


@dataclass(frozen=True)
class TypeRef:
    kind: TypeKind
    name: str = ""

    @property
    def is_ground(self) -> bool:
        return self.kind is not TypeKind.GENERIC

    def __str__(self) -> str:
        if self.kind is TypeKind.DYNAMIC:
            return f"dyn {self.name}"
        if self.kind is TypeKind.FN_VALUE:
            return "fnptr"
        return self.name

    def __lt__(self, other):  # enum members are not orderable
        return (self.kind.value, self.name) < (other.kind.value, other.name)


def concrete(name: str) -> TypeRef:
    return TypeRef(TypeKind.CONCRETE, name)


def generic_var(name: str) -> TypeRef:
    return TypeRef(TypeKind.GENERIC, name)


def dynamic(interface: str) -> TypeRef:
    return TypeRef(TypeKind.DYNAMIC, interface)


FN_VALUE = TypeRef(TypeKind.FN_VALUE)


# Ordered (variable, ground type) pairs.
Substitution = tuple[tuple[str, TypeRef], ...]

SubstitutionLike = Union[Mapping[str, TypeRef], Sequence[tuple[str, TypeRef]]]


def _as_mapping(s: SubstitutionLike) -> dict[str, TypeRef]:
    if isinstance(s, Mapping):
        return dict(s)
    out: dict[str, TypeRef] = {}
    for name, value in s:
        if name in out:
            raise ModelError(f"duplicate substitution key {name!r}")
        out[name] = value
    return out


def apply_substitution(t: TypeRef, s: SubstitutionLike, *,
                       require_ground: bool = False) -> TypeRef:
    """Replace a generic variable by its binding in ``s``.

    Type references are flat, so one lookup is the whole recursion.  With
    ``require_ground`` an unbound variable raises instead of passing through.
    """
    if t.kind is not TypeKind.GENERIC:
        return t
    binding = _as_mapping(s).get(t.name)
    if binding is None:
        if require_ground:
            raise UnboundVariableError(f"generic variable {t.name!r} is unbound")
        return t
    return binding


def compose(inner: SubstitutionLike, outer: SubstitutionLike) -> dict[str, TypeRef]:
    """Bindings of ``inner`` with ``outer`` applied to their values."""
    outer_map = _as_mapping(outer)
    return {k: apply_substitution(v, outer_map) for k, v in _as_mapping(inner).items()}


# ---------------------------------------------------------------------------
# Statements


class UnsafeOpKind(enum.Enum):
    UNSAFE_CALL = "UnsafeCall"
    RAW_DEREF = "RawDeref"
    GLOBAL_ACCESS = "GlobalAccess"
    INLINE_ASM = "InlineAsm"
    UNION_FIELD = "UnionField"


class CallKind(enum.Enum):
    STATIC = "static"
    GENERIC = "generic"
    DYNAMIC = "dynamic"
    INDIRECT = "indirect"
    GENERIC_RECEIVER = "generic-receiver"


@dataclass(frozen=True)
class CallSite:
    """One call occurrence.

    The parser fills the syntactic fields (``path`` or ``receiver``/``method``
    or ``indirect``); name resolution fills ``kind`` and the binding fields.
    """
    path: tuple[str, ...] = ()
    type_args: tuple[TypeRef, ...] = ()
    args: tuple[str, ...] = ()
    receiver: Optional[str] = None
    method: Optional[str] = None
    indirect: bool = False
    # bound by resolution
    kind: Optional[CallKind] = None
    target: Optional[str] = None
    interface: Optional[str] = None
    receiver_var: Optional[str] = None
    loc: Location = field(default=NOWHERE, compare=False)

    @property
    def text(self) -> str:
        if self.indirect:
            return f"indirect {self.receiver}"
        if self.receiver is not None:
            return f"{self.receiver}.{self.method}()"
        return "::".join(self.path) + "()"


@dataclass(frozen=True)
class UnsafeBlock:
    body: tuple["Statement", ...] = ()
    loc: Location = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class Primitive:
    op: UnsafeOpKind
    global_name: Optional[str] = None
    write: bool = False
    loc: Location = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class LocalDecl:
    name: str
    type: TypeRef
    loc: Location = field(default=NOWHERE, compare=False)


Statement = Union[CallSite, UnsafeBlock, Primitive, LocalDecl]


def walk(body: Sequence[Statement], in_block: bool = False
         ) -> Iterator[tuple[Statement, bool]]:
    """Yield every statement with whether it sits inside an unsafe block."""
    for stmt in body:
        yield stmt, in_block
        if isinstance(stmt, UnsafeBlock):
            yield from walk(stmt.body, True)


# ---------------------------------------------------------------------------
# Declarations


class Origin(enum.Enum):
    NATIVE = "native"
    EXTERNAL = "external"
    ABSTRACT = "abstract"


ABIS = ("C", "intrinsic", "native")


@dataclass(frozen=True)
class Param:
    name: str
    type: Optional[TypeRef]  # None for ``self``

    @property
    def is_self(self) -> bool:
        return self.name == "self"


@dataclass(frozen=True)
class FunctionRecord:
    id: str
    package: str
    name: str
    declared_unsafe: bool = False
    generics: tuple[tuple[str, Optional[str]], ...] = ()
    params: tuple[Param, ...] = ()
    body: tuple[Statement, ...] = ()
    origin: Origin = Origin.NATIVE
    abi: Optional[str] = None
    generated: bool = False
    container: Optional[str] = None  # implementing type for impl methods
    interface: Optional[str] = None
    loc: Location = field(default=NOWHERE, compare=False)

    def __post_init__(self):
        if self.origin is Origin.EXTERNAL and (self.body or not self.declared_unsafe):
            raise ModelError(f"external function {self.id} must be bodiless and unsafe")

    @property
    def is_generic(self) -> bool:
        return bool(self.generics)

    @property
    def generic_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.generics)

    def bound_of(self, var: str) -> Optional[str]:
        return dict(self.generics).get(var)

    def has_unsafe_block(self) -> bool:
        return any(isinstance(s, UnsafeBlock) for s, _ in walk(self.body))


@dataclass(frozen=True)
class MethodSig:
    name: str
    declared_unsafe: bool = False
    params: tuple[Param, ...] = ()
    loc: Location = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class InterfaceRecord:
    name: str
    package: str
    declared_unsafe: bool = False
    methods: tuple[MethodSig, ...] = ()
    generated: bool = False
    loc: Location = field(default=NOWHERE, compare=False)

    def method(self, name: str) -> Optional[MethodSig]:
        for sig in self.methods:
            if sig.name == name:
                return sig
        return None

    def method_id(self, name: str) -> str:
        return f"{self.package}::{self.name}::{name}"

    def method_record(self, name: str) -> FunctionRecord:
        sig = self.method(name)
        if sig is None:
            raise KeyError(name)
        return FunctionRecord(id=self.method_id(name), package=self.package, name=name,
                              declared_unsafe=sig.declared_unsafe, params=sig.params,
                              origin=Origin.ABSTRACT, interface=self.name)


@dataclass(frozen=True)
class ImplRecord:
    interface: str
    type_name: str
    package: str
    declared_unsafe: bool = False
    methods: tuple[str, ...] = ()  # function ids
    generated: bool = False
    loc: Location = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class GlobalRecord:
    name: str
    mutable: bool = False
    loc: Location = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class TypeDecl:
    name: str
    loc: Location = field(default=NOWHERE, compare=False)


@dataclass(frozen=True)
class PackageUnit:
    name: str
    dependencies: tuple[str, ...] = ()
    functions: tuple[FunctionRecord, ...] = ()
    interfaces: tuple[InterfaceRecord, ...] = ()
    impls: tuple[ImplRecord, ...] = ()
    globals: tuple[GlobalRecord, ...] = ()
    types: tuple[TypeDecl, ...] = ()
    loc: Location = field(default=NOWHERE, compare=False)

    def global_named(self, name: str) -> Optional[GlobalRecord]:
        for g in self.globals:
            if g.name == name:
                return g
        return None


@dataclass(frozen=True)
class Corpus:
    """A set of packages, kept sorted by name."""
    packages: tuple[PackageUnit, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.packages, key=lambda p: p.name))
        object.__setattr__(self, "packages", ordered)

    @cached_property
    def package_map(self) -> dict[str, PackageUnit]:
        return {p.name: p for p in self.packages}

    @cached_property
    def functions(self) -> dict[str, FunctionRecord]:
        return {f.id: f for p in self.packages for f in p.functions}

    @cached_property
    def interfaces(self) -> dict[str, InterfaceRecord]:
        return {i.name: i for p in self.packages for i in p.interfaces}

    @cached_property
    def type_packages(self) -> dict[str, str]:
        return {t.name: p.name for p in self.packages for t in p.types}

    @cached_property
    def impls(self) -> dict[tuple[str, str], ImplRecord]:
        """(interface, type) -> implementation."""
        return {(i.interface, i.type_name): i for p in self.packages for i in p.impls}

    def impl_method(self, interface: str, type_name: str, method: str) -> Optional[str]:
        impl = self.impls.get((interface, type_name))
        if impl is None:
            return None
        for fid in impl.methods:
            if self.functions[fid].name == method:
                return fid
        return None

    def methods_of_type(self, type_name: str, method: str) -> list[tuple[str, str]]:
        """All (interface, function id) pairs providing ``method`` for a type."""
        found = []
        for (iface, tname), impl in sorted(self.impls.items()):
            if tname != type_name:
                continue
            fid = self.impl_method(iface, tname, method)
            if fid is not None:
                found.append((iface, fid))
        return found

    def transitive_dependencies(self, name: str) -> set[str]:
        seen: set[str] = set()
        stack = list(self.package_map[name].dependencies)
        while stack:
            dep = stack.pop()
            if dep in seen:
                continue
            seen.add(dep)
            stack.extend(self.package_map[dep].dependencies)
        return seen


def make_node_key(function: FunctionRecord, subst: SubstitutionLike = ()) -> str:
    """Canonical graph-node key for a function under a ground substitution.

    Bindings are written in the function's generics declaration order.
    """
    bindings = _as_mapping(subst)
    if set(bindings) != set(function.generic_names):
        raise ArityError(
            f"{function.id} expects generics {list(function.generic_names)}, "
            f"got {sorted(bindings)}")
    if not function.generics:
        return function.id
    for name, value in bindings.items():
        if not value.is_ground:
            raise UnboundVariableError(f"binding {name}={value} is not ground")
    inner = ",".join(f"{name}={bindings[name]}" for name in function.generic_names)
    return f"{function.id}<{inner}>"


def normalize_substitution(function: FunctionRecord, subst: SubstitutionLike) -> Substitution:
    bindings = _as_mapping(subst)
    return tuple((name, bindings[name]) for name in function.generic_names)


def ungrounded_key(function: FunctionRecord) -> str:
    return f"{function.id}<{','.join(function.generic_names)}>"


def unsafe_op_of(stmt: Statement, corpus: Corpus) -> Optional[UnsafeOpKind]:
    """The unsafe operation a statement performs, if any.

    Blocks and local declarations perform none themselves; a call counts when
    its resolved target (or the interface method it dispatches to) is
    declared unsafe.  Indirect calls through function values are safe calls.
    """
    if isinstance(stmt, Primitive):
        return stmt.op
    if not isinstance(stmt, CallSite):
        return None
    if stmt.kind in (CallKind.STATIC, CallKind.GENERIC):
        target = corpus.functions.get(stmt.target or "")
        if target is not None and target.declared_unsafe:
            return UnsafeOpKind.UNSAFE_CALL
    elif stmt.kind in (CallKind.DYNAMIC, CallKind.GENERIC_RECEIVER):
        iface = corpus.interfaces.get(stmt.interface or "")
        sig = iface.method(stmt.method or "") if iface else None
        if sig is not None and sig.declared_unsafe:
            return UnsafeOpKind.UNSAFE_CALL
    return None
