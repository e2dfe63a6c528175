"""Glue running the stages end to end on a resolved corpus."""
from __future__ import annotations

from typing import Iterable, Optional

from .analysis import MODES, FunctionVerdict, Mode, analyze, classify_called_abis, classify_unsafe_ops
from .graph import DEFAULT_DEPTH_CAP, DualCallGraph, build_extended_call_graph
from .metrics import (
    abstraction_prevalence, cdf_series, dependency_unsafety_matrix, mean_direct_dependencies,
    only_safe_percentage, package_metrics,
)
from .model import Corpus
from .report import MetricsReport


def verdicts_by_mode(corpus: Corpus, graph: DualCallGraph,
                     modes: Iterable[Mode] = MODES) -> dict[Mode, dict[str, FunctionVerdict]]:
    return {m: analyze(corpus, graph, m) for m in modes}


def metrics_report(corpus: Corpus, trusted: Iterable[str] = (),
                   depth_cap: int = DEFAULT_DEPTH_CAP, early_termination: bool = False,
                   graph: Optional[DualCallGraph] = None) -> MetricsReport:
    trusted = tuple(trusted)
    if graph is None:
        graph = build_extended_call_graph(corpus, trusted, depth_cap, early_termination)
    verdicts = verdicts_by_mode(corpus, graph)
    packages = package_metrics(corpus, verdicts)
    counts = {m.package: m.counts for m in packages}
    return MetricsReport(
        packages=packages,
        prevalence=abstraction_prevalence([m.counts for m in packages]),
        only_safe={m.value: only_safe_percentage(corpus, verdicts[m]) for m in MODES},
        matrix=dependency_unsafety_matrix(corpus, counts),
        mean_deps=mean_direct_dependencies(corpus),
        ops=classify_unsafe_ops(corpus),
        abis=classify_called_abis(corpus, trusted),
    )


def cdf_table(report: MetricsReport, cap: float = 100) -> dict:
    """CDF series keyed by output name."""
    pk = report.packages
    if not pk:
        return {}
    return {
        "blocks": cdf_series([m.counts.blocks for m in pk], cap),
        "unsafe_fns": cdf_series([m.counts.unsafe_fns for m in pk], cap),
        "possibly_unsafe_conservative": cdf_series(
            [m.fns_possibly_unsafe_conservative for m in pk], cap),
        "possibly_unsafe_optimistic": cdf_series(
            [m.fns_possibly_unsafe_optimistic for m in pk], cap),
    }
