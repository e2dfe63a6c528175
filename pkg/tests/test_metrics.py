from fractions import Fraction

import networkx as nx
import pytest
from hypothesis import given, settings, strategies as st

from conftest import corpus_of
from unsafeprop.analysis import Mode
from unsafeprop.frontend import load_corpus
from unsafeprop.graph import build_extended_call_graph
from unsafeprop.metrics import (
    AbstractionCounts, DependencyMatrix, abstraction_prevalence, cdf_series,
    count_unsafe_abstractions, dependency_unsafety_matrix, format_pct, mean_direct_dependencies,
    only_safe_percentage, snapshot_diff,
)
from unsafeprop.pipeline import metrics_report, verdicts_by_mode
from unsafeprop.report import metrics_csv, read_metrics_counts
from unsafeprop.synth import random_corpus

C, O = Mode.CONSERVATIVE, Mode.OPTIMISTIC


def counts_map(corpus):
    return {p.name: count_unsafe_abstractions(p) for p in corpus.packages}


def cdf_pairs(series):
    return [(v, float(p)) for v, p in series.points]


@pytest.fixture(scope="module")
def fig1_verdicts(fig1, fig1_graph):
    return verdicts_by_mode(fig1, fig1_graph)


class TestFormatting:
    @pytest.mark.parametrize("x,text", [
        (Fraction(0), "0.0"), (Fraction(40), "40.0"), (Fraction(1, 20), "0.1"),
        (Fraction(9, 4), "2.3"), (Fraction(-1, 20), "-0.1"), (Fraction(100, 3), "33.3"),
        (Fraction(200, 3), "66.7"), (Fraction(3, 4), "0.8"),
    ])
    def test_half_away_from_zero(self, x, text):
        assert format_pct(x) == text

    def test_places(self):
        assert format_pct(Fraction(3, 4), 2) == "0.75"
        assert format_pct(Fraction(5, 2), 0) == "3"


class TestAbstractionCounts:
    def test_fig1(self, fig1):
        counts = counts_map(fig1)
        assert counts["library5"] == AbstractionCounts(1, 0, 0, 0)
        assert counts["library4"] == AbstractionCounts(0, 1, 0, 0)

    def test_empty_package(self):
        (pkg,) = corpus_of("package p;").packages
        assert count_unsafe_abstractions(pkg) == AbstractionCounts(0, 0, 0, 0)

    def test_nested_blocks(self):
        (pkg,) = corpus_of("package p; fn f() { unsafe { unsafe { @asm; } } }").packages
        assert count_unsafe_abstractions(pkg).blocks == 2

    def test_interfaces_and_impls(self):
        (pkg,) = corpus_of("""
            package p;
            type X;
            unsafe interface R { unsafe fn poke(self); }
            unsafe impl R for X { unsafe fn poke(self) { } }""").packages
        assert count_unsafe_abstractions(pkg) == AbstractionCounts(0, 1, 1, 1)


class TestPrevalence:
    def test_fig1(self, fig1):
        prev = abstraction_prevalence(list(counts_map(fig1).values()))
        assert (prev.any, prev.blocks, prev.unsafe_fns) == (40, 20, 20)
        assert prev.unsafe_interfaces == prev.unsafe_impls == 0

    def test_every_package_has_a_block(self):
        prev = abstraction_prevalence([AbstractionCounts(blocks=2)] * 4)
        assert prev.blocks == 100

    def test_ten_packages_three_with_blocks(self):
        counts = [AbstractionCounts(blocks=1)] * 3 + [AbstractionCounts()] * 7
        assert format_pct(abstraction_prevalence(counts).blocks) == "30.0"

    def test_empty(self):
        assert abstraction_prevalence([]).empty

    @given(st.lists(st.builds(AbstractionCounts, *[st.integers(0, 3)] * 4), max_size=30))
    def test_any_dominates(self, counts):
        prev = abstraction_prevalence(counts)
        for name in ("blocks", "unsafe_fns", "unsafe_interfaces", "unsafe_impls"):
            assert prev.any >= getattr(prev, name)


class TestCdf:
    def test_hand_computed(self):
        assert cdf_pairs(cdf_series([0, 0, 1, 3])) == [(0, 50), (1, 75), (3, 100)]

    def test_single(self):
        assert cdf_pairs(cdf_series([5])) == [(5, 100)]

    def test_fig1_blocks(self, fig1):
        values = [c.blocks for c in counts_map(fig1).values()]
        assert sorted(values) == [0, 0, 0, 0, 1]
        assert cdf_pairs(cdf_series(values)) == [(0, 80), (1, 100)]

    def test_cap(self):
        assert cdf_pairs(cdf_series([0, 0, 1, 3], cap=80)) == [(0, 50), (1, 75)]

    @pytest.mark.parametrize("cap", [0, -1, 100.5])
    def test_bad_cap(self, cap):
        with pytest.raises(ValueError):
            cdf_series([1], cap)

    @given(st.lists(st.integers(0, 50), max_size=60),
           st.floats(min_value=1, max_value=100))
    def test_monotone_and_capped(self, values, cap):
        points = cdf_series(values, cap).points
        for (v1, p1), (v2, p2) in zip(points, points[1:]):
            assert v1 < v2 and p1 < p2
        assert all(p <= Fraction(cap) for _, p in points)
        if values and cap == 100:
            assert points[-1] == (max(values), 100)


class TestOnlySafe:
    def test_fig1(self, fig1, fig1_verdicts):
        assert only_safe_percentage(fig1, fig1_verdicts[C]) == 20
        assert only_safe_percentage(fig1, fig1_verdicts[O]) == 60

    def test_all_safe(self):
        corpus = corpus_of("package p; fn f() { }", "package q; fn g() { }")
        verdicts = verdicts_by_mode(corpus, build_extended_call_graph(corpus))
        assert only_safe_percentage(corpus, verdicts[C]) == 100

    def test_empty(self):
        assert only_safe_percentage(corpus_of(), {}) is None


class TestDependencyMatrix:
    def test_fig1(self, fig1):
        m = dependency_unsafety_matrix(fig1, counts_map(fig1))
        assert (m.own_and_deps, m.own_only, m.deps_only, m.neither) == (20, 20, 40, 20)

    def test_isolated_safe_packages(self):
        corpus = corpus_of("package a;", "package b;")
        assert dependency_unsafety_matrix(corpus, counts_map(corpus)).neither == 100


class TestMeanDependencies:
    def test_fig1(self, fig1):
        assert mean_direct_dependencies(fig1) == 1

    def test_single_package(self):
        assert mean_direct_dependencies(corpus_of("package a;")) == 0

    def test_chain_of_four(self):
        corpus = corpus_of("package a; use b;", "package b; use c;", "package c; use d;",
                           "package d;")
        assert format_pct(mean_direct_dependencies(corpus), 2) == "0.75"

    def test_empty(self):
        assert mean_direct_dependencies(corpus_of()) is None


def ten_packages(blocks_of_first):
    snap = {f"p{i}": AbstractionCounts(blocks=2, unsafe_fns=1) for i in range(10)}
    snap["p0"] = AbstractionCounts(blocks=blocks_of_first, unsafe_fns=1)
    return snap


class TestSnapshotDiff:
    def test_identical(self):
        snap = ten_packages(2)
        diff = snapshot_diff(snap, snap)
        assert all(d["same"] == 100 for d in diff.summary.values())

    def test_one_increase(self):
        diff = snapshot_diff(ten_packages(2), ten_packages(3))
        assert diff.summary["blocks"] == {"same": 90, "increase": 10, "decrease": 0}
        assert diff.summary["unsafe_fns"]["same"] == 100

    def test_churn_shaped_pair(self):
        old = {f"p{i:02}": AbstractionCounts(blocks=5) for i in range(50)}
        new = dict(old)
        for i in range(5):
            new[f"p{i:02}"] = AbstractionCounts(blocks=6)
        for i in range(5, 9):
            new[f"p{i:02}"] = AbstractionCounts(blocks=4)
        summary = snapshot_diff(old, new).summary["blocks"]
        assert {k: format_pct(v) for k, v in summary.items()} == {
            "same": "82.0", "increase": "10.0", "decrease": "8.0"}

    def test_unmatched(self):
        diff = snapshot_diff({"a": AbstractionCounts()}, {"b": AbstractionCounts()})
        assert diff.unmatched == ("a", "b") and diff.empty


CELL_OF = {(True, True): "own_and_deps", (True, False): "own_only",
           (False, True): "deps_only", (False, False): "neither"}


def closure_matrix(corpus, counts):
    """Reference matrix using networkx reachability for the closures."""
    g = nx.DiGraph()
    g.add_nodes_from(counts)
    g.add_edges_from((p.name, d) for p in corpus.packages for d in p.dependencies)
    cells = dict.fromkeys(CELL_OF.values(), 0)
    for name in counts:
        deps = any(counts[d].any for d in nx.descendants(g, name))
        cells[CELL_OF[(counts[name].any, deps)]] += 1
    n = len(counts)
    return DependencyMatrix(*(Fraction(100 * cells[k], n) for k in CELL_OF.values()))


class TestCorpusProperties:
    @settings(max_examples=40)
    @given(st.integers(0, 10**6))
    def test_synthetic(self, seed):
        corpus, _ = load_corpus(random_corpus(seed))
        counts = counts_map(corpus)
        m = dependency_unsafety_matrix(corpus, counts)
        assert m.own_and_deps + m.own_only + m.deps_only + m.neither == 100
        assert m == closure_matrix(corpus, counts)
        verdicts = verdicts_by_mode(corpus, build_extended_call_graph(corpus))
        assert only_safe_percentage(corpus, verdicts[O]) >= only_safe_percentage(corpus, verdicts[C])
        assert metrics_csv(metrics_report(corpus)) == metrics_csv(metrics_report(corpus))


def test_metrics_csv_round_trip(tmp_path, fig1):
    path = tmp_path / "m.csv"
    path.write_text(metrics_csv(metrics_report(fig1)))
    assert read_metrics_counts(path) == counts_map(fig1)
    (tmp_path / "bad.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        read_metrics_counts(tmp_path / "bad.csv")
