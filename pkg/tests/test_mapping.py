from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stimex.corpus import Span
from stimex.mapping import clauses_to_tokens, tokens_to_clauses


def spans(bounds):
    return [Span(a, b) for a, b in bounds]


def test_tokens_to_clauses_worked_example():
    iob = ["O", "O", "O", "O", "B", "I", "I", "I", "I", "I"]
    clauses = spans([(0, 4), (4, 10)])
    assert tokens_to_clauses(iob, clauses) == [False, True]


def test_single_labeled_token_marks_clause():
    assert tokens_to_clauses(["O", "I", "O"], spans([(0, 3)])) == [True]


def test_partial_overlap_marks_clause():
    iob = ["O", "B", "I", "O", "O"]
    assert tokens_to_clauses(iob, spans([(0, 2), (2, 5)])) == [True, True]


def test_tokens_to_clauses_no_clauses():
    assert tokens_to_clauses(["B", "I"], []) == []


def test_clauses_to_tokens_worked_example():
    got = clauses_to_tokens([False, True], spans([(0, 4), (4, 10)]), 10)
    assert got == ["O", "O", "O", "O", "B", "I", "I", "I", "I", "I"]


def test_adjacent_stimulus_clauses_restart_with_b():
    got = clauses_to_tokens([True, True], spans([(0, 2), (2, 4)]), 4)
    assert got == ["B", "I", "B", "I"]


def test_uncovered_tokens_stay_o():
    got = clauses_to_tokens([True], spans([(2, 4)]), 6)
    assert got == ["O", "O", "B", "I", "O", "O"]


def test_validation_errors():
    with pytest.raises(ValueError, match="overlaps"):
        tokens_to_clauses(["O"] * 5, spans([(0, 3), (2, 5)]))
    with pytest.raises(ValueError, match="exceeds"):
        tokens_to_clauses(["O"] * 3, spans([(0, 4)]))
    with pytest.raises(ValueError, match="flags"):
        clauses_to_tokens([True], spans([(0, 1), (1, 2)]), 2)
    with pytest.raises(ValueError, match="exceeds"):
        clauses_to_tokens([True], spans([(0, 4)]), 3)


@st.composite
def tilings(draw):
    n = draw(st.integers(min_value=1, max_value=20))
    cuts = sorted(draw(st.sets(st.integers(min_value=1, max_value=max(1, n - 1)), max_size=6)))
    cuts = [c for c in cuts if c < n]
    bounds = [0] + cuts + [n]
    clauses = [Span(a, b) for a, b in zip(bounds, bounds[1:])]
    flags = [draw(st.booleans()) for _ in clauses]
    return n, clauses, flags


@given(tilings())
@settings(max_examples=200, deadline=None)
def test_clause_round_trip_is_identity_on_tilings(case):
    n, clauses, flags = case
    iob = clauses_to_tokens(flags, clauses, n)
    assert tokens_to_clauses(iob, clauses) == flags


@given(tilings())
@settings(max_examples=200, deadline=None)
def test_token_round_trip_keeps_labels_inside_clauses(case):
    n, clauses, _ = case
    rng = np.random.default_rng(n)
    iob = [["O", "B", "I"][int(k)] for k in rng.integers(0, 3, size=n)]
    back = clauses_to_tokens(tokens_to_clauses(iob, clauses), clauses, n)
    for sp in clauses:
        had_label = any(lab != "O" for lab in iob[sp.start : sp.end])
        has_label = any(lab != "O" for lab in back[sp.start : sp.end])
        assert has_label == had_label
        if had_label:  # widened to the full clause, never lost
            assert all(lab != "O" for lab in back[sp.start : sp.end])
