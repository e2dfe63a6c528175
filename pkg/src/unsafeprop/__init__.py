"""Whole-chain safety analysis for packages written in a small systems language.

Typical pipeline::

    corpus, diagnostics = load_corpus(sources)
    graph = build_extended_call_graph(corpus)
    verdicts = analyze(corpus, graph, Mode.CONSERVATIVE)
"""
from .analysis import Label, Mode, analyze
from .frontend import FrontendError, load_corpus
from .graph import build_extended_call_graph

__version__ = "0.1.0"

__all__ = ["FrontendError", "Label", "Mode", "analyze", "build_extended_call_graph",
           "load_corpus"]
