"""Corpus-level measurements over packages.

All percentages are exact Fractions on the 0-100 scale; rounding happens only
when a report is written (see ``format_pct``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .analysis import FunctionVerdict, Mode
from .model import Corpus, PackageUnit, UnsafeBlock, walk


def round_half_away(x: Fraction, places: int = 1) -> Fraction:
    scale = 10 ** places
    n = math.floor(abs(x) * scale + Fraction(1, 2))
    return Fraction(n if x >= 0 else -n, scale)


def format_pct(x: Fraction, places: int = 1) -> str:
    r = round_half_away(Fraction(x), places)
    scaled = abs(r) * 10 ** places
    whole, frac = divmod(int(scaled), 10 ** places)
    sign = "-" if r < 0 else ""
    return f"{sign}{whole}.{frac:0{places}d}" if places else f"{sign}{whole}"


def _pct(part: int, whole: int) -> Fraction:
    return Fraction(100 * part, whole) if whole else Fraction(0)


@dataclass(frozen=True)
class AbstractionCounts:
    blocks: int = 0
    unsafe_fns: int = 0
    unsafe_interfaces: int = 0
    unsafe_impls: int = 0

    @property
    def any(self) -> bool:
        return any(getattr(self, f.name) > 0 for f in fields(self))


ABSTRACTIONS = tuple(f.name for f in fields(AbstractionCounts))


def count_unsafe_abstractions(pkg: PackageUnit) -> AbstractionCounts:
    """Lexical counts of the four unsafe abstractions; generated records skipped."""
    blocks = unsafe_fns = 0
    for fn in pkg.functions:
        if fn.generated:
            continue
        unsafe_fns += fn.declared_unsafe
        blocks += sum(isinstance(s, UnsafeBlock) for s, _ in walk(fn.body))
    interfaces = sum(i.declared_unsafe and not i.generated for i in pkg.interfaces)
    impls = sum(i.declared_unsafe and not i.generated for i in pkg.impls)
    return AbstractionCounts(blocks, unsafe_fns, interfaces, impls)


@dataclass(frozen=True)
class PackageMetrics:
    package: str
    counts: AbstractionCounts
    fns_total: int
    fns_possibly_unsafe_conservative: int
    fns_possibly_unsafe_optimistic: int
    direct_deps: int

    def possibly_unsafe(self, mode: Mode) -> int:
        if mode is Mode.CONSERVATIVE:
            return self.fns_possibly_unsafe_conservative
        return self.fns_possibly_unsafe_optimistic

    def safe(self, mode: Mode) -> int:
        return self.fns_total - self.possibly_unsafe(mode)


def package_metrics(corpus: Corpus,
                    verdicts: Mapping[Mode, Mapping[str, FunctionVerdict]]
                    ) -> list[PackageMetrics]:
    out = []
    for pkg in corpus.packages:
        ids = [f.id for f in pkg.functions if not f.generated]
        unsafe = {m: sum(verdicts[m][fid].possibly_unsafe for fid in ids)
                  for m in verdicts}
        out.append(PackageMetrics(
            pkg.name, count_unsafe_abstractions(pkg), len(ids),
            unsafe.get(Mode.CONSERVATIVE, 0), unsafe.get(Mode.OPTIMISTIC, 0),
            len(pkg.dependencies)))
    return out


@dataclass(frozen=True)
class Prevalence:
    any: Fraction
    blocks: Fraction
    unsafe_fns: Fraction
    unsafe_interfaces: Fraction
    unsafe_impls: Fraction
    empty: bool = False


def abstraction_prevalence(counts: Sequence[AbstractionCounts]) -> Prevalence:
    """Percent of packages using each abstraction at least once."""
    n = len(counts)
    if n == 0:
        zero = Fraction(0)
        return Prevalence(zero, zero, zero, zero, zero, empty=True)
    per = {a: _pct(sum(getattr(c, a) > 0 for c in counts), n) for a in ABSTRACTIONS}
    return Prevalence(_pct(sum(c.any for c in counts), n), **per)


@dataclass(frozen=True)
class CdfSeries:
    points: tuple[tuple[int, Fraction], ...]
    cap: Fraction

    def __iter__(self):
        return iter(self.points)


def cdf_series(values: Iterable[int], cap: float | Fraction = 100) -> CdfSeries:
    """Cumulative percent of packages with count <= v, for each distinct v.

    Points whose cumulative percent exceeds ``cap`` are dropped, as are all
    points after them.
    """
    cap = Fraction(cap)
    if not 0 < cap <= 100:
        raise ValueError("cap percentile must lie in (0, 100]")
    ordered = sorted(values)
    n = len(ordered)
    points = []
    for i, v in enumerate(ordered):
        if i + 1 < n and ordered[i + 1] == v:
            continue
        frac = _pct(i + 1, n)
        if frac > cap:
            break
        points.append((v, frac))
    return CdfSeries(tuple(points), cap)


def only_safe_percentage(corpus: Corpus, verdicts: Mapping[str, FunctionVerdict]
                         ) -> Optional[Fraction]:
    """Percent of packages whose functions are all safe; None for an empty corpus."""
    if not corpus.packages:
        return None
    clean = sum(
        all(not verdicts[f.id].possibly_unsafe for f in p.functions if not f.generated)
        for p in corpus.packages)
    return _pct(clean, len(corpus.packages))


@dataclass(frozen=True)
class DependencyMatrix:
    own_and_deps: Fraction
    own_only: Fraction
    deps_only: Fraction
    neither: Fraction
    empty: bool = False


def dependency_unsafety_matrix(corpus: Corpus, counts: Mapping[str, AbstractionCounts]
                               ) -> DependencyMatrix:
    """Packages split by own unsafe use and unsafe use anywhere in their
    transitive dependency closure."""
    cells = [0, 0, 0, 0]
    for pkg in corpus.packages:
        own = counts[pkg.name].any
        deps = any(counts[d].any for d in corpus.transitive_dependencies(pkg.name))
        cells[(0 if own else 2) + (0 if deps else 1)] += 1
    n = len(corpus.packages)
    return DependencyMatrix(*(_pct(c, n) for c in cells), empty=n == 0)


def mean_direct_dependencies(corpus: Corpus) -> Optional[Fraction]:
    if not corpus.packages:
        return None
    return Fraction(sum(len(p.dependencies) for p in corpus.packages), len(corpus.packages))


DIFF_ABSTRACTIONS = ("blocks", "unsafe_fns")
SAME, INCREASE, DECREASE = "same", "increase", "decrease"


@dataclass(frozen=True)
class DiffRecord:
    package: str
    abstraction: str
    old: int
    new: int

    @property
    def classification(self) -> str:
        if self.new == self.old:
            return SAME
        return INCREASE if self.new > self.old else DECREASE


@dataclass(frozen=True)
class SnapshotDiff:
    records: tuple[DiffRecord, ...]
    summary: dict[str, dict[str, Fraction]]
    unmatched: tuple[str, ...]
    empty: bool = False


def snapshot_diff(old: Mapping[str, AbstractionCounts],
                  new: Mapping[str, AbstractionCounts]) -> SnapshotDiff:
    """Compare block and declared-unsafe-function counts of packages present
    in both snapshots; packages in only one are listed as unmatched."""
    matched = sorted(set(old) & set(new))
    unmatched = tuple(sorted(set(old) ^ set(new)))
    records = tuple(DiffRecord(name, a, getattr(old[name], a), getattr(new[name], a))
                    for name in matched for a in DIFF_ABSTRACTIONS)
    summary = {}
    for a in DIFF_ABSTRACTIONS:
        rows = [r for r in records if r.abstraction == a]
        summary[a] = {c: _pct(sum(r.classification == c for r in rows), len(rows))
                      for c in (SAME, INCREASE, DECREASE)}
    return SnapshotDiff(records, summary, unmatched, empty=not matched)
