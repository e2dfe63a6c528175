"""Serialization of analysis results: CSV tables and JSON documents.

Every writer produces byte-stable text for identical inputs (fixed ordering,
``\\n`` line endings, no timestamps).
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .analysis import CONTEXTS, AbiCensus, ABI_BINS, FunctionVerdict, OpCensus
from .metrics import (
    ABSTRACTIONS, AbstractionCounts, CdfSeries, DependencyMatrix, PackageMetrics,
    Prevalence, SnapshotDiff, format_pct,
)
from .model import UnsafeOpKind

METRICS_COLUMNS = (
    "package", "blocks", "unsafe_fns", "unsafe_interfaces", "unsafe_impls", "fns_total",
    "fns_possibly_unsafe_conservative", "fns_possibly_unsafe_optimistic", "direct_deps",
)
VERDICT_COLUMNS = ("id", "mode", "label", "declared_unsafe", "vacuous")
DIFF_COLUMNS = ("package", "abstraction", "old", "new", "classification")


def dumps_json(data) -> str:
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"


def _csv(rows: Iterable[Iterable]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _pct_cell(x: Optional[Fraction]) -> str:
    return "empty" if x is None else format_pct(x)


# -- verdicts -----------------------------------------------------------------

def verdict_rows(verdicts: Iterable[FunctionVerdict]) -> list[dict]:
    return [{"id": v.id, "mode": v.mode, "label": v.label.value,
             "declared_unsafe": v.declared_unsafe, "vacuous": v.vacuous}
            for v in sorted(verdicts)]


def verdicts_json(verdicts: Iterable[FunctionVerdict]) -> str:
    return dumps_json(verdict_rows(verdicts))


def verdicts_csv(verdicts: Iterable[FunctionVerdict]) -> str:
    rows = verdict_rows(verdicts)
    return _csv([VERDICT_COLUMNS] + [
        [r["id"], r["mode"], r["label"], str(r["declared_unsafe"]).lower(),
         str(r["vacuous"]).lower()] for r in rows])


# -- metrics ------------------------------------------------------------------

@dataclass
class MetricsReport:
    packages: list[PackageMetrics]
    prevalence: Prevalence
    only_safe: Mapping[str, Optional[Fraction]]
    matrix: DependencyMatrix
    mean_deps: Optional[Fraction]
    ops: OpCensus
    abis: AbiCensus


def metrics_csv(report: MetricsReport) -> str:
    rows: list[list] = [list(METRICS_COLUMNS)]
    for m in report.packages:
        c = m.counts
        rows.append([m.package, c.blocks, c.unsafe_fns, c.unsafe_interfaces, c.unsafe_impls,
                     m.fns_total, m.fns_possibly_unsafe_conservative,
                     m.fns_possibly_unsafe_optimistic, m.direct_deps])
    prev = report.prevalence
    for name in ("any",) + ABSTRACTIONS:
        value = "empty" if prev.empty else format_pct(getattr(prev, name))
        rows.append(["#prevalence", name, value])
    for mode, value in report.only_safe.items():
        rows.append(["#only_safe", mode, _pct_cell(value)])
    mat = report.matrix
    for name in ("own_and_deps", "own_only", "deps_only", "neither"):
        rows.append(["#matrix", name, "empty" if mat.empty else format_pct(getattr(mat, name))])
    rows.append(["#mean_direct_deps", "all", _pct_cell(report.mean_deps)])
    totals = report.ops.totals()
    for context in CONTEXTS:
        pcts = report.ops.percentages(context)
        for kind in UnsafeOpKind:
            rows.append([f"#ops_{context}", kind.value, totals[(context, kind)],
                         format_pct(pcts[kind])])
    pcts = report.abis.percentages()
    for b in ABI_BINS:
        rows.append(["#abi", b, report.abis.counts[b], format_pct(pcts[b])])
    return _csv(rows)


def cdf_csv(series: CdfSeries) -> str:
    return _csv([("count", "cumulative_percent")]
                + [(v, format_pct(p)) for v, p in series.points])


def read_metrics_counts(path: str | Path) -> dict[str, AbstractionCounts]:
    """Per-package abstraction counts from a metrics CSV (summary rows skipped)."""
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0][:len(METRICS_COLUMNS)]) != METRICS_COLUMNS:
        raise ValueError(f"{path}: not a metrics report")
    out = {}
    for row in rows[1:]:
        if not row or row[0].startswith("#"):
            continue
        out[row[0]] = AbstractionCounts(*(int(x) for x in row[1:5]))
    return out


# -- snapshot diffs -------------------------------------------------------------

def diff_csv(diff: SnapshotDiff) -> str:
    rows: list[list] = [list(DIFF_COLUMNS)]
    rows += [[r.package, r.abstraction, r.old, r.new, r.classification] for r in diff.records]
    for abstraction, classes in diff.summary.items():
        for cls, value in classes.items():
            rows.append(["#summary", abstraction, cls,
                         "empty" if diff.empty else format_pct(value)])
    rows += [["#unmatched", name] for name in diff.unmatched]
    return _csv(rows)


def diff_json(diff: SnapshotDiff) -> str:
    return dumps_json({
        "records": [{"package": r.package, "abstraction": r.abstraction, "old": r.old,
                     "new": r.new, "classification": r.classification}
                    for r in diff.records],
        "summary": {a: {c: None if diff.empty else float(format_pct(v))
                        for c, v in classes.items()}
                    for a, classes in diff.summary.items()},
        "unmatched": list(diff.unmatched),
        "empty": diff.empty,
    })
