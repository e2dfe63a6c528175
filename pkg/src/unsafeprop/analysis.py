"""Unsafety propagation over the extended call graph and per-function verdicts."""
from __future__ import annotations

import enum
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional

from .graph import DualCallGraph, representative_key, reverse_graph
from .model import (
    CallKind, CallSite, Corpus, FunctionRecord, Origin, UnsafeOpKind, unsafe_op_of, walk,
)

ORACLE_NODE_LIMIT = 10_000


class Mode(enum.Enum):
    CONSERVATIVE = "conservative"
    OPTIMISTIC = "optimistic"


MODES = (Mode.CONSERVATIVE, Mode.OPTIMISTIC)


class Label(enum.Enum):
    SAFE = "safe"
    POSSIBLY_UNSAFE = "possibly-unsafe"


def seed_worklist(graph: DualCallGraph, corpus: Corpus, mode: Mode) -> set[str]:
    """Nodes of functions with an unsafe block in their body, plus the abstract
    and unresolved sinks when running conservatively.

    Declared-unsafe functions are not seeded; their callers already are.
    Trusted-package leaves and compiler-generated functions never seed.
    """
    seeds = set()
    for key, node in graph.nodes.items():
        if node.is_sink or node.leaf is not None or node.function is None:
            continue
        fn = corpus.functions.get(node.function)
        if fn is not None and not fn.generated and fn.has_unsafe_block():
            seeds.add(key)
    if mode is Mode.CONSERVATIVE:
        seeds |= graph.seed_extension
    return seeds


def propagate_unsafety(graph: DualCallGraph, seeds: Iterable[str],
                       trace: Optional[list[str]] = None) -> dict[str, Label]:
    """Mark every transitive caller of a seed possibly unsafe.

    Runs on the reversed graph with a FIFO worklist; a node is pushed at most
    once.  ``trace`` collects the popped nodes when given.
    """
    seeds = sorted(set(seeds))
    missing = [s for s in seeds if s not in graph.nodes]
    if missing:
        raise ValueError(f"seeds not in graph: {missing}")
    callers = reverse_graph(graph)
    unsafe = set(seeds)
    worklist = deque(seeds)
    while worklist:
        current = worklist.popleft()
        if trace is not None:
            trace.append(current)
        for caller in callers[current]:
            if caller not in unsafe:
                unsafe.add(caller)
                worklist.append(caller)
    return {k: Label.POSSIBLY_UNSAFE if k in unsafe else Label.SAFE for k in graph.nodes}


def brute_force_oracle(graph: DualCallGraph, seeds: Iterable[str]) -> dict[str, Label]:
    """Reference labelling: for each node separately, search forward for a seed."""
    if len(graph.nodes) > ORACLE_NODE_LIMIT:
        raise ValueError("graph too large for the brute-force oracle")
    seeds = set(seeds)
    out_edges: dict[str, set[str]] = {k: set() for k in graph.nodes}
    for e in graph.edges:
        out_edges[e.src].add(e.dst)
    labels = {}
    for start in graph.nodes:
        seen = {start}
        stack = [start]
        hit = False
        while stack and not hit:
            node = stack.pop()
            if node in seeds:
                hit = True
                break
            for nxt in out_edges[node]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        labels[start] = Label.POSSIBLY_UNSAFE if hit else Label.SAFE
    return labels


@dataclass(frozen=True, order=True)
class FunctionVerdict:
    id: str
    mode: str
    label: Label = field(compare=False)
    declared_unsafe: bool = field(default=False, compare=False)
    vacuous: bool = field(default=False, compare=False)

    @property
    def possibly_unsafe(self) -> bool:
        return self.label is Label.POSSIBLY_UNSAFE


def classify_function(fn: FunctionRecord, labels: dict[str, Label]) -> Label:
    if fn.declared_unsafe:
        return Label.POSSIBLY_UNSAFE
    return labels.get(representative_key(fn), Label.SAFE)


def analyze(corpus: Corpus, graph: DualCallGraph, mode: Mode) -> dict[str, FunctionVerdict]:
    """Verdict for every function in the corpus under one mode."""
    labels = propagate_unsafety(graph, seed_worklist(graph, corpus, mode))
    vacuous = set(find_vacuous_declared_unsafe(corpus))
    return {
        fid: FunctionVerdict(fid, mode.value, classify_function(fn, labels),
                             fn.declared_unsafe, fid in vacuous)
        for fid, fn in sorted(corpus.functions.items())
    }


def possibly_unsafe_set(verdicts: dict[str, FunctionVerdict]) -> set[str]:
    return {fid for fid, v in verdicts.items() if v.possibly_unsafe}


# ---------------------------------------------------------------------------
# Censuses

BLOCK = "block"
FUNCTION = "function"
CONTEXTS = (BLOCK, FUNCTION)


def _percent(part: int, whole: int) -> Fraction:
    return Fraction(100 * part, whole) if whole else Fraction(0)


@dataclass
class OpCensus:
    """Unsafe-operation counts per package, keyed by (context, kind)."""
    by_package: dict[str, Counter] = field(default_factory=dict)

    def totals(self) -> Counter:
        total: Counter = Counter()
        for counts in self.by_package.values():
            total.update(counts)
        return total

    def count(self, context: str, kind: UnsafeOpKind, package: Optional[str] = None) -> int:
        counts = self.totals() if package is None else self.by_package.get(package, Counter())
        return counts[(context, kind)]

    def percentages(self, context: str) -> dict[UnsafeOpKind, Fraction]:
        totals = self.totals()
        whole = sum(totals[(context, k)] for k in UnsafeOpKind)
        return {k: _percent(totals[(context, k)], whole) for k in UnsafeOpKind}


def classify_unsafe_ops(corpus: Corpus) -> OpCensus:
    """Count each unsafe operation once, under its innermost context: an
    unsafe block, else the body of a declared-unsafe function."""
    census = OpCensus({p.name: Counter() for p in corpus.packages})
    for fn in corpus.functions.values():
        if fn.generated or fn.origin is not Origin.NATIVE:
            continue
        counts = census.by_package[fn.package]
        for stmt, in_block in walk(fn.body):
            op = unsafe_op_of(stmt, corpus)
            if op is None:
                continue
            if in_block:
                counts[(BLOCK, op)] += 1
            elif fn.declared_unsafe:
                counts[(FUNCTION, op)] += 1
    return census


ABI_BINS = ("native", "C", "intrinsic", "trusted-package")


@dataclass
class AbiCensus:
    counts: Counter = field(default_factory=Counter)

    @property
    def total(self) -> int:
        return sum(self.counts[b] for b in ABI_BINS)

    def percentages(self) -> dict[str, Fraction]:
        return {b: _percent(self.counts[b], self.total) for b in ABI_BINS}


def _abi_bin(call: CallSite, corpus: Corpus, trusted: frozenset[str]) -> str:
    if call.kind in (CallKind.DYNAMIC, CallKind.GENERIC_RECEIVER):
        iface = corpus.interfaces[call.interface or ""]
        return "trusted-package" if iface.package in trusted else "native"
    target = corpus.functions[call.target or ""]
    if target.package in trusted:
        return "trusted-package"
    if target.origin is Origin.EXTERNAL:
        return target.abi or "C"
    return "native"


def classify_called_abis(corpus: Corpus, trusted: Iterable[str] = ()) -> AbiCensus:
    """Bin every call site whose target is declared unsafe by the target's origin."""
    trusted = frozenset(trusted)
    census = AbiCensus()
    for fn in corpus.functions.values():
        if fn.generated:
            continue
        for stmt, _ in walk(fn.body):
            if unsafe_op_of(stmt, corpus) is UnsafeOpKind.UNSAFE_CALL:
                census.counts[_abi_bin(stmt, corpus, trusted)] += 1
    return census


def find_vacuous_declared_unsafe(corpus: Corpus) -> list[str]:
    """Declared-unsafe native functions whose bodies perform no unsafe operation."""
    found = []
    for fid, fn in sorted(corpus.functions.items()):
        if not fn.declared_unsafe or fn.origin is not Origin.NATIVE or fn.generated:
            continue
        if all(unsafe_op_of(stmt, corpus) is None for stmt, _ in walk(fn.body)):
            found.append(fid)
    return found
