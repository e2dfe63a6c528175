import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import corpus_of
from unsafeprop.analysis import MODES, analyze
from unsafeprop.fixtures import fixture_sources
from unsafeprop.frontend import load_corpus
from unsafeprop.graph import (
    SAFE_LEAF, UNSAFE_LEAF, DanglingReferenceError, DualCallGraph, DynamicTarget, Edge,
    GraphError, Instantiation, NodeKind, NoImplementationError, build_extended_call_graph,
    build_package_graph, early_termination_mark, export_graph, instantiate_generic_call,
    merge_package_graphs, resolve_method_call, reverse_graph,
)
from unsafeprop.model import CallSite, concrete, dynamic, walk
from unsafeprop.synth import random_corpus

FIG1_NODES = {
    "library1::foo", "library2::bar", "library3::TypeA::baz", "library5::TypeB::baz",
    "library4::qux", "abstract(HasBaz::baz)",
}
FIG1_EDGES = {
    Edge("library1::foo", "library2::bar", True),
    Edge("library2::bar", "abstract(HasBaz::baz)", True),
    Edge("library5::TypeB::baz", "library4::qux", True),
}


def fixture_corpus(name):
    return load_corpus(fixture_sources(name))[0]


def synth_corpus(seed):
    return load_corpus(random_corpus(seed))[0]


def edge_pairs(graph):
    return {(e.src, e.dst) for e in graph.edges}


class TestConstruction:
    def test_fig1(self, fig1_graph):
        assert set(fig1_graph.nodes) == FIG1_NODES
        assert set(fig1_graph.edges) == FIG1_EDGES
        assert fig1_graph.nodes["abstract(HasBaz::baz)"].kind is NodeKind.ABSTRACT

    def test_single_function(self):
        graph = build_extended_call_graph(corpus_of("package p; fn f() { }"))
        assert list(graph.nodes) == ["p::f"] and not graph.edges

    def test_empty_corpus(self):
        graph = build_extended_call_graph(corpus_of())
        assert not graph.nodes and not graph.edges

    def test_generic_chain(self):
        graph = build_extended_call_graph(fixture_corpus("generic_chain"))
        ground = {f"lib::{f}<T=TypeA>" for f in "fgh"}
        reps = {f"lib::{f}<T>" for f in "fgh"}
        assert set(graph.nodes) == ground | reps | {"lib::main"}
        for key in ground:
            assert graph.nodes[key].substitution == (("T", concrete("TypeA")),)
        assert edge_pairs(graph) == {
            ("lib::main", "lib::f<T=TypeA>"), ("lib::f<T=TypeA>", "lib::g<T=TypeA>"),
            ("lib::g<T=TypeA>", "lib::h<T=TypeA>"),
            ("lib::f<T>", "lib::g<T>"), ("lib::g<T>", "lib::h<T>"),
        }

    def test_memoized_mutual_recursion(self):
        corpus = corpus_of("""
            package p;
            type TypeA;
            fn main() { f::<TypeA>(); }
            fn f<T>() { g::<TypeA>(); }
            fn g<T>() { f::<TypeA>(); }""")
        graph = build_extended_call_graph(corpus)
        instances = {k for k, n in graph.nodes.items()
                     if n.kind is NodeKind.GROUND and n.substitution}
        assert instances == {"p::f<T=TypeA>", "p::g<T=TypeA>"}
        assert {("p::f<T=TypeA>", "p::g<T=TypeA>"), ("p::g<T=TypeA>", "p::f<T=TypeA>")} \
            <= edge_pairs(graph)

    def test_depth_cap(self):
        graph = build_extended_call_graph(fixture_corpus("depth_cap"), depth_cap=3)
        assert set(graph.nodes) == {
            "lib::main", "lib::a<T=TypeA>", "lib::b<T=TypeA>", "lib::c<T=TypeA>",
            "unresolved(lib::d<T=TypeA>)",
            "lib::a<T>", "lib::b<T>", "lib::c<T>", "lib::d<T>",
        }
        assert graph.nodes["unresolved(lib::d<T=TypeA>)"].kind is NodeKind.UNRESOLVED
        assert "unresolved(lib::d<T=TypeA>)" in graph.seed_extension
        # with room to spare the cycle closes through memoization
        roomy = build_extended_call_graph(fixture_corpus("depth_cap"), depth_cap=8)
        assert ("lib::d<T=TypeA>", "lib::a<T=TypeA>") in edge_pairs(roomy)
        assert not any(n.kind is NodeKind.UNRESOLVED for n in roomy.nodes.values())

    def test_depth_cap_must_be_positive(self, fig1):
        with pytest.raises(ValueError):
            build_package_graph(fig1, "library1", depth_cap=0)

    def test_indirect_calls(self):
        graph = build_extended_call_graph(
            corpus_of("package p; fn f(fp: fnptr) { indirect fp; indirect fp; }"))
        sinks = sorted(graph.seed_extension)
        assert sinks == ["unresolved(indirect p::f#0)", "unresolved(indirect p::f#1)"]

    def test_generic_receiver_in_representative(self):
        corpus = corpus_of("""
            package p;
            interface I { fn m(self); }
            fn f<T: I>(x: T) { x.m(); }""")
        graph = build_extended_call_graph(corpus)
        assert edge_pairs(graph) == {("p::f<T>", "abstract(p::f<T> T.m)")}

    def test_trusted_packages_are_leaves(self, fig1):
        graph = build_extended_call_graph(fig1, trusted=["library4", "library3"])
        assert graph.nodes["library4::qux"].leaf == UNSAFE_LEAF
        assert graph.nodes["library3::TypeA::baz"].leaf == SAFE_LEAF
        assert not any(e.src in ("library4::qux", "library3::TypeA::baz") for e in graph.edges)
        assert graph.trusted == ("library3", "library4")

    def test_unknown_trusted_package(self, fig1):
        with pytest.raises(GraphError):
            build_extended_call_graph(fig1, trusted=["nope"])

    def test_export_shape(self, fig1_graph):
        data = export_graph(fig1_graph)
        assert set(data) == {"nodes", "edges", "meta"}
        assert data["meta"] == {"depth_cap": 8, "trusted": [], "early_termination": False}
        assert {"from": "library1::foo", "to": "library2::bar", "external": True} in data["edges"]
        json.dumps(data)

    @settings(max_examples=40)
    @given(st.integers(0, 10**6))
    def test_structural_invariants(self, seed):
        corpus = synth_corpus(seed)
        graph = build_extended_call_graph(corpus)
        assert graph == build_extended_call_graph(corpus)
        for e in graph.edges:
            src, dst = graph.nodes[e.src], graph.nodes[e.dst]
            assert not src.is_sink
            assert e.external == (src.package != dst.package)
        ground = [n for n in graph.nodes.values() if n.kind is NodeKind.GROUND]
        assert len({(n.function, n.substitution) for n in ground}) == len(ground)
        reps = [n for n in graph.nodes.values() if n.kind is NodeKind.UNGROUNDED]
        assert len({n.function for n in reps}) == len(reps)
        assert all(not n.stub for n in graph.nodes.values())


# -- generic instantiation and method resolution ---------------------------------

def first_call(corpus, fid):
    return next(s for s, _ in walk(corpus.functions[fid].body) if isinstance(s, CallSite))


class TestInstantiation:
    def test_direct_substitution(self):
        corpus = corpus_of("""
            package p;
            type TypeA;
            fn f<T>(x: T) { g::<T>(x); }
            fn g<T>(y: T) { }""")
        call = first_call(corpus, "p::f")
        result = instantiate_generic_call(corpus, call, {"T": concrete("TypeA")})
        assert result == Instantiation("p::g", (("T", concrete("TypeA")),), "p::g<T=TypeA>")
        assert instantiate_generic_call(corpus, call, None) is None

    def test_generic_receiver_resolves_statically(self):
        sources = dict(fixture_sources("fig1"))
        sources["library6.ml"] = """package library6;
            use library3;
            fn call_baz<T: HasBaz>(x: T) { x.baz(); }"""
        corpus, _ = load_corpus(sources)
        call = first_call(corpus, "library6::call_baz")
        target = instantiate_generic_call(corpus, call, {"T": concrete("TypeB")})
        assert target.function == "library5::TypeB::baz"
        dyn = instantiate_generic_call(corpus, call, {"T": dynamic("HasBaz")})
        assert dyn == DynamicTarget("HasBaz", "baz")

    def test_resolve_method_call(self, fig1):
        assert resolve_method_call(concrete("TypeA"), "baz", fig1) == "library3::TypeA::baz"
        assert resolve_method_call(concrete("TypeB"), "baz", fig1) == "library5::TypeB::baz"
        assert resolve_method_call(dynamic("HasBaz"), "baz", fig1) == DynamicTarget("HasBaz", "baz")
        assert resolve_method_call(dynamic("HasBaz"), "baz", fig1).key == "abstract(HasBaz::baz)"

    def test_resolve_method_call_missing(self, fig1):
        with pytest.raises(NoImplementationError):
            resolve_method_call(concrete("TypeA"), "nope", fig1)
        with pytest.raises(NoImplementationError):
            resolve_method_call(concrete("TypeA"), "baz", fig1, interface="Other")


# -- merging ------------------------------------------------------------------------

class TestMerge:
    def test_fig1_per_package_merge(self, fig1, fig1_graph):
        parts = [build_package_graph(fig1, p.name) for p in fig1.packages]
        assert parts[0].nodes["library2::bar"].stub
        merged = merge_package_graphs(parts)
        assert merged == fig1_graph
        assert set(merged.edges) == FIG1_EDGES

    def test_identity(self, fig1_graph):
        assert merge_package_graphs([fig1_graph]) == fig1_graph
        single = corpus_of("package p; fn f() { g(); } fn g() { }")
        graph = build_package_graph(single, "p")
        assert merge_package_graphs([graph]) == graph

    def test_dangling_reference(self, fig1):
        with pytest.raises(DanglingReferenceError):
            merge_package_graphs([build_package_graph(fig1, "library1")])

    def test_mismatched_configuration(self, fig1):
        with pytest.raises(GraphError):
            merge_package_graphs([build_package_graph(fig1, "library4", depth_cap=2),
                                  build_package_graph(fig1, "library3")])

    @settings(max_examples=30)
    @given(st.integers(0, 10**6), st.randoms(use_true_random=False))
    def test_commutative(self, seed, rnd):
        corpus = synth_corpus(seed)
        parts = [build_package_graph(corpus, p.name) for p in corpus.packages]
        shuffled = list(parts)
        rnd.shuffle(shuffled)
        assert merge_package_graphs(parts) == merge_package_graphs(shuffled)
        whole = merge_package_graphs(parts)
        assert merge_package_graphs([whole, whole]) == whole


# -- reversal and early termination ----------------------------------------------------

def reversed_graph(graph):
    return DualCallGraph(graph.nodes, frozenset(Edge(e.dst, e.src, e.external) for e in graph.edges))


class TestReverse:
    def test_fig1(self, fig1_graph):
        rev = reverse_graph(fig1_graph)
        assert {k: v for k, v in rev.items() if v} == {
            "abstract(HasBaz::baz)": ["library2::bar"],
            "library2::bar": ["library1::foo"],
            "library4::qux": ["library5::TypeB::baz"],
        }

    def test_empty(self):
        assert reverse_graph(DualCallGraph({}, frozenset())) == {}

    @settings(max_examples=40)
    @given(st.integers(0, 10**6))
    def test_double_reversal(self, seed):
        graph = build_extended_call_graph(synth_corpus(seed))
        twice = reversed_graph(reversed_graph(graph))
        assert twice.edges == graph.edges
        assert reverse_graph(reversed_graph(graph)) == {
            k: sorted(set(v)) for k, v in graph.successors.items()}


class TestEarlyTermination:
    def test_fig1_flag(self, fig1):
        graph = build_extended_call_graph(fig1, early_termination=True)
        flags = early_termination_mark(graph)
        assert flags["library5::TypeB::baz"]
        assert sum(flags.values()) == 1
        # the truncated call to qux is gone from the graph but verdicts agree
        assert ("library5::TypeB::baz", "library4::qux") not in edge_pairs(graph)
        plain = build_extended_call_graph(fig1)
        for mode in MODES:
            assert analyze(fig1, graph, mode) == analyze(fig1, plain, mode)

    def test_all_safe_corpus(self):
        corpus = corpus_of("package p; fn f() { g(); } fn g() { }")
        graph = build_extended_call_graph(corpus, early_termination=True)
        assert not any(early_termination_mark(graph).values())
