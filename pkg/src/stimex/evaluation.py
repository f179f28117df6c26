"""Span- and clause-level evaluation.

Five measures: clause-level precision/recall/F1 over the positive class, and
four span-matching regimes (Exact, Relaxed, Left-Exact, Right-Exact).  Span
matching is any-match without one-to-one assignment: a predicted span counts
toward precision if any gold span matches it, and a gold span counts toward
recall if any prediction matches it.  Counts are micro-averaged over the
corpus.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from stimex.corpus import Span


class MatchMode(enum.Enum):
    EXACT = "exact"
    RELAXED = "relaxed"
    LEFT_EXACT = "left"
    RIGHT_EXACT = "right"
    CLAUSE = "clause"


SPAN_MODES = (MatchMode.EXACT, MatchMode.RELAXED, MatchMode.LEFT_EXACT, MatchMode.RIGHT_EXACT)

EVAL_COLUMNS = (
    "dataset",
    "model",
    "mode",
    "precision_pct",
    "recall_pct",
    "f1_pct",
    "precision",
    "recall",
    "f1",
)


@dataclass(frozen=True)
class Prf:
    precision: float
    recall: float
    f1: float
    tp_p: int
    tp_r: int
    n_pred: int
    n_gold: int

    @classmethod
    def from_counts(cls, tp_p: int, tp_r: int, n_pred: int, n_gold: int) -> "Prf":
        precision = tp_p / n_pred if n_pred else 0.0
        recall = tp_r / n_gold if n_gold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision, recall, f1, tp_p, tp_r, n_pred, n_gold)


def span_match(pred: Span, gold: Span, mode: MatchMode) -> bool:
    if mode is MatchMode.EXACT:
        return pred == gold
    if mode is MatchMode.RELAXED:
        return pred.overlaps(gold)
    if mode is MatchMode.LEFT_EXACT:
        return pred.start == gold.start
    if mode is MatchMode.RIGHT_EXACT:
        return pred.end == gold.end
    raise ValueError(f"{mode} is not a span-matching mode")


def span_prf(
    pred: Sequence[Sequence[Span]], gold: Sequence[Sequence[Span]], mode: MatchMode
) -> Prf:
    """Micro-averaged span P/R/F1 under one matching mode."""
    if mode not in SPAN_MODES:
        raise ValueError(f"{mode} is not a span-matching mode")
    if len(pred) != len(gold):
        raise ValueError(f"mismatched instance sets: {len(pred)} predicted vs {len(gold)} gold")
    tp_p = tp_r = n_pred = n_gold = 0
    for pred_spans, gold_spans in zip(pred, gold):
        n_pred += len(pred_spans)
        n_gold += len(gold_spans)
        tp_p += sum(1 for p in pred_spans if any(span_match(p, g, mode) for g in gold_spans))
        tp_r += sum(1 for g in gold_spans if any(span_match(p, g, mode) for p in pred_spans))
    return Prf.from_counts(tp_p, tp_r, n_pred, n_gold)


def clause_prf(
    pred_flags: Sequence[Sequence[bool]], gold_flags: Sequence[Sequence[bool]]
) -> Prf:
    """P/R/F1 over the positive (stimulus) clause class."""
    if len(pred_flags) != len(gold_flags):
        raise ValueError(
            f"mismatched instance sets: {len(pred_flags)} predicted vs {len(gold_flags)} gold"
        )
    tp = n_pred = n_gold = 0
    for pred_inst, gold_inst in zip(pred_flags, gold_flags):
        if len(pred_inst) != len(gold_inst):
            raise ValueError(
                f"instance clause counts differ: {len(pred_inst)} vs {len(gold_inst)}"
            )
        for p, g in zip(pred_inst, gold_inst):
            n_pred += bool(p)
            n_gold += bool(g)
            tp += bool(p) and bool(g)
    return Prf.from_counts(tp, tp, n_pred, n_gold)


@dataclass(frozen=True)
class AlignmentReport:
    """Fractions of stimulus spans matched by some clause boundary."""

    exact: float
    left: float
    right: float
    n_stimuli: int


def clause_alignment(
    stimuli: Sequence[Sequence[Span]], clauses: Sequence[Sequence[Span]]
) -> AlignmentReport:
    """How well stimulus spans align with a clause segmentation."""
    if len(stimuli) != len(clauses):
        raise ValueError(
            f"mismatched instance sets: {len(stimuli)} stimuli vs {len(clauses)} clauses"
        )
    exact = left = right = total = 0
    for spans, segs in zip(stimuli, clauses):
        for sp in spans:
            total += 1
            exact += any(sp == c for c in segs)
            left += any(sp.start == c.start for c in segs)
            right += any(sp.end == c.end for c in segs)
    if total == 0:
        return AlignmentReport(0.0, 0.0, 0.0, 0)
    return AlignmentReport(exact / total, left / total, right / total, total)


def clause_match_prf(
    extracted: Sequence[Sequence[Span]], annotated: Sequence[Sequence[Span]]
) -> Prf:
    """Exact-boundary P/R/F1 of extracted clauses against annotated clauses."""
    return span_prf(extracted, annotated, MatchMode.EXACT)


def boundary_decisions(segments: Sequence[Span], n: int) -> list[int]:
    """Binary decision per internal token gap (1..n-1): is it a boundary?"""
    if n < 1:
        raise ValueError("sequence must have at least one token")
    points = set()
    for sp in segments:
        if sp.end > n:
            raise ValueError(f"segment [{sp.start}, {sp.end}) exceeds sequence length {n}")
        points.add(sp.start)
        points.add(sp.end)
    return [1 if i in points else 0 for i in range(1, n)]


def cohen_kappa(a1: Sequence[int], a2: Sequence[int]) -> float:
    """Cohen's kappa over two aligned binary decision sequences."""
    if len(a1) != len(a2):
        raise ValueError(f"decision sequences differ in length: {len(a1)} vs {len(a2)}")
    if not a1:
        raise ValueError("empty decision sequences")
    x = [bool(v) for v in a1]
    y = [bool(v) for v in a2]
    n = len(x)
    p_o = sum(a == b for a, b in zip(x, y)) / n
    p1x = sum(x) / n
    p1y = sum(y) / n
    p_e = p1x * p1y + (1 - p1x) * (1 - p1y)
    if p_e == 1.0:
        # Both marginals degenerate on the same side, so observed agreement is 1.
        return 1.0
    return (p_o - p_e) / (1 - p_e)


def format_eval_csv(rows: Sequence[tuple[str, str, MatchMode, Prf]]) -> str:
    """One row per (dataset, model, mode): integer-percent and full-precision P/R/F1."""
    lines = [",".join(EVAL_COLUMNS)]
    for dataset, model, mode, prf in rows:
        lines.append(
            ",".join(
                [
                    dataset,
                    model,
                    mode.value,
                    str(round(prf.precision * 100)),
                    str(round(prf.recall * 100)),
                    str(round(prf.f1 * 100)),
                    str(prf.precision),
                    str(prf.recall),
                    str(prf.f1),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_eval_csv(rows: Sequence[tuple[str, str, MatchMode, Prf]], path: str | Path) -> None:
    Path(path).write_text(format_eval_csv(rows), encoding="utf-8")
