from __future__ import annotations

import textwrap

import pytest
from hypothesis import HealthCheck, settings

from unsafeprop.fixtures import fixture_sources
from unsafeprop.frontend import load_corpus
from unsafeprop.graph import build_extended_call_graph

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def corpus_of(*sources: str, **named: str):
    """Resolved corpus from inline sources; positional ones get synthetic names."""
    files = {f"src{i}.ml": textwrap.dedent(s) for i, s in enumerate(sources)}
    files.update({k: textwrap.dedent(v) for k, v in named.items()})
    corpus, _ = load_corpus(files)
    return corpus


@pytest.fixture(scope="session")
def fig1_loaded():
    return load_corpus(fixture_sources("fig1"))


@pytest.fixture(scope="session")
def fig1(fig1_loaded):
    return fig1_loaded[0]


@pytest.fixture(scope="session")
def fig1_graph(fig1):
    return build_extended_call_graph(fig1)


# PASS/FAIL lines from the acceptance suite, echoed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
