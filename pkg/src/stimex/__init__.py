"""Emotion stimulus span detection toolkit.

Detecting the textual cause of an expressed emotion can be framed two ways:
token-level sequence labeling (IOB spans) or clause-level classification over
a clause segmentation derived from constituency trees.  This package provides
the corpus model, clause extraction, both model families, the mapping between
the two task formulations, and span/clause evaluation.
"""

from stimex.corpus import (
    ClauseAnnotation,
    CorpusError,
    Instance,
    Span,
    compute_stats,
    generate_synthetic,
    iob_to_spans,
    load_corpus,
    save_corpus,
    spans_to_iob,
    split_corpus,
)
from stimex.parsetree import BracketParseError, ConstTree, parse_bracket
from stimex.clause_extract import extract_clauses, join_segments

__version__ = "0.1.0"

__all__ = [
    "ClauseAnnotation",
    "CorpusError",
    "Instance",
    "Span",
    "BracketParseError",
    "ConstTree",
    "compute_stats",
    "extract_clauses",
    "generate_synthetic",
    "iob_to_spans",
    "join_segments",
    "load_corpus",
    "parse_bracket",
    "save_corpus",
    "spans_to_iob",
    "split_corpus",
    "__version__",
]
