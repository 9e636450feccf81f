"""Python bindings for the figcap caption pipeline and evaluation harness."""

from ._figcap import (
    METRIC_NAMES,
    evaluate_corpus,
    evaluate_pair,
    format_delta,
    length_window,
    parse_ranking,
    passes_threshold,
    percent_delta,
    segment,
    token_count,
    tokenize,
    validate_corpus,
)

__all__ = [
    "METRIC_NAMES",
    "evaluate_corpus",
    "evaluate_pair",
    "format_delta",
    "length_window",
    "parse_ranking",
    "passes_threshold",
    "percent_delta",
    "segment",
    "token_count",
    "tokenize",
    "validate_corpus",
]
