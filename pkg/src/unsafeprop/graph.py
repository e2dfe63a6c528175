"""Extended call graph construction.

Nodes pair a function with a ground substitution of its generic variables.
Generic functions additionally get one un-grounded representative node whose
generic-receiver calls stay abstract.  Calls that cannot be resolved
statically (dynamic dispatch, function values, instantiations past the depth
cap) end in abstract or unresolved sink nodes; the analysis decides whether
those sinks count as unsafe (conservative) or safe (optimistic).

Graphs are built per package with calls into other packages recorded as
external edges to stub nodes, then merged.
"""
from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Optional, Union

from .model import (
    CallKind, CallSite, Corpus, FunctionRecord, Origin, Substitution, TypeKind, TypeRef,
    UnsafeBlock, apply_substitution, make_node_key, normalize_substitution,
    ungrounded_key, walk,
)

DEFAULT_DEPTH_CAP = 8


class GraphError(Exception):
    pass


class DanglingReferenceError(GraphError):
    pass


class NoImplementationError(GraphError):
    pass


class NodeKind(enum.Enum):
    GROUND = "ground"
    UNGROUNDED = "ungrounded"
    ABSTRACT = "abstract"
    UNRESOLVED = "unresolved"


SAFE_LEAF = "safe-leaf"
UNSAFE_LEAF = "unsafe-leaf"


@dataclass(frozen=True)
class GraphNode:
    key: str
    kind: NodeKind
    function: Optional[str]
    substitution: Substitution = ()
    package: str = ""
    leaf: Optional[str] = None  # set for callees in trusted packages
    stub: bool = False  # another package's node, referenced but not expanded

    @property
    def is_sink(self) -> bool:
        return self.kind in (NodeKind.ABSTRACT, NodeKind.UNRESOLVED)


@dataclass(frozen=True, order=True)
class Edge:
    src: str
    dst: str
    external: bool = False


@dataclass(frozen=True, eq=False)
class DualCallGraph:
    """Node and edge sets shared by the conservative and optimistic variants."""
    nodes: Mapping[str, GraphNode]
    edges: frozenset[Edge]
    depth_cap: int = DEFAULT_DEPTH_CAP
    trusted: tuple[str, ...] = ()
    early_termination: bool = False
    truncated: frozenset[str] = frozenset()
    packages: tuple[str, ...] = ()

    def __eq__(self, other):
        if not isinstance(other, DualCallGraph):
            return NotImplemented
        return (dict(self.nodes) == dict(other.nodes) and self.edges == other.edges
                and self.meta == other.meta and self.truncated == other.truncated)

    @property
    def meta(self) -> tuple:
        return (self.depth_cap, self.trusted, self.early_termination)

    @cached_property
    def seed_extension(self) -> frozenset[str]:
        """Abstract and unresolved nodes, seeded unsafe by the conservative analysis."""
        return frozenset(k for k, n in self.nodes.items() if n.is_sink)

    @cached_property
    def successors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {k: [] for k in self.nodes}
        for e in sorted(self.edges):
            adj[e.src].append(e.dst)
        return adj

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class DynamicTarget:
    interface: str
    method: str

    @property
    def key(self) -> str:
        return f"abstract({self.interface}::{self.method})"


@dataclass(frozen=True)
class Instantiation:
    function: str
    substitution: Substitution
    key: str


def resolve_method_call(receiver: TypeRef, method: str, corpus: Corpus,
                        interface: Optional[str] = None) -> Union[str, DynamicTarget]:
    """Static target id for a concrete receiver, or the dynamic (interface, method).

    ``interface`` restricts the lookup to one interface, as for a receiver
    typed by a bounded generic variable.
    """
    if receiver.kind is TypeKind.DYNAMIC:
        return DynamicTarget(receiver.name, method)
    if receiver.kind is not TypeKind.CONCRETE:
        raise GraphError(f"receiver {receiver} is neither concrete nor dynamic")
    if interface is not None:
        fid = corpus.impl_method(interface, receiver.name, method)
        if fid is None:
            raise NoImplementationError(f"{receiver.name} does not implement {interface}::{method}")
        return fid
    found = corpus.methods_of_type(receiver.name, method)
    if len(found) != 1:
        raise NoImplementationError(
            f"{receiver.name}::{method} has {len(found)} implementations")
    return found[0][1]


def instantiate_generic_call(corpus: Corpus, call: CallSite,
                             caller_subst: Optional[Mapping[str, TypeRef]]
                             ) -> Union[Instantiation, DynamicTarget, None]:
    """Push the caller's substitution through a generic or generic-receiver call.

    Returns None when the result is not ground (the caller is un-grounded).
    Memoization and the depth cap are the builder's business.
    """
    bindings = dict(caller_subst or {})
    if call.kind is CallKind.GENERIC:
        target = corpus.functions[call.target or ""]
        if len(call.type_args) != len(target.generics):
            raise GraphError(f"type-argument arity mismatch at {call.loc}")
        args = [apply_substitution(t, bindings) for t in call.type_args]
        if not all(t.is_ground for t in args):
            return None
        subst = dict(zip(target.generic_names, args))
        return Instantiation(target.id, normalize_substitution(target, subst),
                             make_node_key(target, subst))
    if call.kind is CallKind.GENERIC_RECEIVER:
        receiver = bindings.get(call.receiver_var or "")
        if receiver is None:
            return None
        resolved = resolve_method_call(receiver, call.method or "", corpus, call.interface)
        if isinstance(resolved, DynamicTarget):
            return resolved
        return Instantiation(resolved, (), resolved)
    raise GraphError(f"call {call.text} is not generic")


class _PackageBuilder:
    def __init__(self, corpus: Corpus, package: str, trusted: frozenset[str],
                 depth_cap: int, early_termination: bool):
        self.corpus = corpus
        self.package = package
        self.trusted = trusted
        self.depth_cap = depth_cap
        self.early_termination = early_termination
        self.nodes: dict[str, GraphNode] = {}
        self.edges: set[Edge] = set()
        self.truncated: set[str] = set()
        self.queue: deque = deque()

    def build(self) -> DualCallGraph:
        pkg = self.corpus.package_map[self.package]
        for fn in sorted(pkg.functions, key=lambda f: f.id):
            if fn.is_generic:
                node = GraphNode(ungrounded_key(fn), NodeKind.UNGROUNDED, fn.id,
                                 package=fn.package, leaf=self._leaf_tag(fn))
                self._add(node, fn, None, 0)
            else:
                node = GraphNode(fn.id, NodeKind.GROUND, fn.id, package=fn.package,
                                 leaf=self._leaf_tag(fn))
                self._add(node, fn, {}, 0)
        while self.queue:
            self._expand(*self.queue.popleft())
        return DualCallGraph(dict(sorted(self.nodes.items())), frozenset(self.edges),
                             self.depth_cap, tuple(sorted(self.trusted)),
                             self.early_termination, frozenset(self.truncated),
                             (self.package,))

    def _leaf_tag(self, fn: FunctionRecord) -> Optional[str]:
        if fn.package not in self.trusted:
            return None
        return UNSAFE_LEAF if fn.declared_unsafe else SAFE_LEAF

    def _add(self, node: GraphNode, fn: Optional[FunctionRecord], subst, depth: int) -> None:
        self.nodes[node.key] = node
        if fn is not None and node.leaf is None and not node.stub:
            self.queue.append((node, fn, subst, depth))

    def _expand(self, node: GraphNode, fn: FunctionRecord, subst, depth: int) -> None:
        if fn.origin is Origin.EXTERNAL:
            return
        indirect_ordinal = 0
        for stmt, _ in walk(fn.body):
            if isinstance(stmt, UnsafeBlock) and self.early_termination:
                self.truncated.add(node.key)
                return
            if not isinstance(stmt, CallSite):
                continue
            if stmt.kind is CallKind.INDIRECT:
                key = f"unresolved(indirect {fn.id}#{indirect_ordinal})"
                indirect_ordinal += 1
                if key not in self.nodes:
                    self._add(GraphNode(key, NodeKind.UNRESOLVED, fn.id, package=fn.package),
                              None, None, 0)
                self._edge(node, key)
            else:
                self._edge(node, self._target(stmt, fn, subst, depth))

    def _edge(self, src: GraphNode, dst_key: str) -> None:
        dst = self.nodes[dst_key]
        self.edges.add(Edge(src.key, dst_key, src.package != dst.package))

    def _target(self, call: CallSite, fn: FunctionRecord, subst, depth: int) -> str:
        if call.kind is CallKind.STATIC:
            return self._function_node(self.corpus.functions[call.target or ""])
        if call.kind is CallKind.DYNAMIC:
            return self._abstract(DynamicTarget(call.interface or "", call.method or ""))
        result = instantiate_generic_call(self.corpus, call, subst)
        if isinstance(result, DynamicTarget):
            return self._abstract(result)
        if result is None:
            if call.kind is CallKind.GENERIC:
                return self._function_node(self.corpus.functions[call.target or ""])
            key = f"abstract({ungrounded_key(fn)} {call.receiver_var}.{call.method})"
            if key not in self.nodes:
                self._add(GraphNode(key, NodeKind.ABSTRACT, fn.id, package=fn.package),
                          None, None, 0)
            return key
        target = self.corpus.functions[result.function]
        if not target.is_generic:
            return self._function_node(target)
        return self._instance(target, result, depth)

    def _abstract(self, target: DynamicTarget) -> str:
        if target.key not in self.nodes:
            iface = self.corpus.interfaces[target.interface]
            self._add(GraphNode(target.key, NodeKind.ABSTRACT, iface.method_id(target.method),
                                package=iface.package), None, None, 0)
        return target.key

    def _function_node(self, target: FunctionRecord) -> str:
        """Node of a non-generic function, or the representative of a generic one."""
        kind = NodeKind.UNGROUNDED if target.is_generic else NodeKind.GROUND
        key = ungrounded_key(target) if target.is_generic else target.id
        if key not in self.nodes:
            leaf = self._leaf_tag(target)
            stub = leaf is None and target.package != self.package
            self._add(GraphNode(key, kind, target.id, package=target.package, leaf=leaf,
                                stub=stub), None, None, 0)
        return key

    def _instance(self, target: FunctionRecord, inst: Instantiation, depth: int) -> str:
        if target.package in self.trusted:
            return self._function_node(target)
        if inst.key in self.nodes:
            return inst.key
        if depth + 1 > self.depth_cap:
            key = f"unresolved({inst.key})"
            if key not in self.nodes:
                self._add(GraphNode(key, NodeKind.UNRESOLVED, target.id, inst.substitution,
                                    target.package), None, None, 0)
            return key
        node = GraphNode(inst.key, NodeKind.GROUND, target.id, inst.substitution,
                         target.package)
        self._add(node, target, dict(inst.substitution), depth + 1)
        return inst.key


def build_package_graph(corpus: Corpus, package: str, trusted: Iterable[str] = (),
                        depth_cap: int = DEFAULT_DEPTH_CAP,
                        early_termination: bool = False) -> DualCallGraph:
    if depth_cap < 1:
        raise ValueError("depth cap must be at least 1")
    return _PackageBuilder(corpus, package, frozenset(trusted), depth_cap,
                           early_termination).build()


def merge_package_graphs(graphs: Iterable[DualCallGraph]) -> DualCallGraph:
    """Union per-package graphs, binding external stubs to their real nodes."""
    graphs = list(graphs)
    if not graphs:
        return DualCallGraph({}, frozenset())
    metas = {g.meta for g in graphs}
    if len(metas) > 1:
        raise GraphError("graphs were built with different configurations")
    nodes: dict[str, GraphNode] = {}
    for g in graphs:
        for key, node in g.nodes.items():
            existing = nodes.get(key)
            if existing is None or (existing.stub and not node.stub):
                nodes[key] = node
    dangling = sorted(k for k, n in nodes.items() if n.stub)
    if dangling:
        raise DanglingReferenceError(
            "external references to packages outside the merge set: " + ", ".join(dangling))
    first = graphs[0]
    return DualCallGraph(
        dict(sorted(nodes.items())),
        frozenset().union(*(g.edges for g in graphs)),
        first.depth_cap, first.trusted, first.early_termination,
        frozenset().union(*(g.truncated for g in graphs)),
        tuple(sorted(set().union(*(g.packages for g in graphs)))),
    )


def build_extended_call_graph(corpus: Corpus, trusted: Iterable[str] = (),
                              depth_cap: int = DEFAULT_DEPTH_CAP,
                              early_termination: bool = False) -> DualCallGraph:
    """Build every package's graph and merge them."""
    trusted = tuple(sorted(set(trusted)))
    unknown = [t for t in trusted if t not in corpus.package_map]
    if unknown:
        raise GraphError(f"unknown trusted packages: {', '.join(unknown)}")
    return merge_package_graphs(
        build_package_graph(corpus, p.name, trusted, depth_cap, early_termination)
        for p in corpus.packages)


def reverse_graph(graph: DualCallGraph) -> dict[str, list[str]]:
    """Callee -> callers adjacency over every node."""
    rev: dict[str, list[str]] = {k: [] for k in graph.nodes}
    for e in sorted(graph.edges, key=lambda e: (e.dst, e.src)):
        rev[e.dst].append(e.src)
    return rev


def early_termination_mark(graph: DualCallGraph) -> dict[str, bool]:
    """Per-node flag: was traversal out of this node cut at an unsafe block."""
    return {k: k in graph.truncated for k in graph.nodes}


def representative_key(fn: FunctionRecord) -> str:
    return ungrounded_key(fn) if fn.is_generic else fn.id


def export_graph(graph: DualCallGraph) -> dict:
    """Plain-data form of a graph, ordered for byte-stable serialization."""
    return {
        "nodes": [
            {"key": n.key, "kind": n.kind.value, "function": n.function,
             "substitution": [[name, str(t)] for name, t in n.substitution]}
            for n in graph.nodes.values()
        ],
        "edges": [{"from": e.src, "to": e.dst, "external": e.external}
                  for e in sorted(graph.edges)],
        "meta": {"depth_cap": graph.depth_cap, "trusted": list(graph.trusted),
                 "early_termination": graph.early_termination},
    }

