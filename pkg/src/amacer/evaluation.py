"""Clustering-based evaluation against gold attribute spans.

Predicted occurrences are aligned to gold spans (exactly or by majority
overlap), clustering agreement is scored over the matched items only,
and coverage recall folds in how much of the gold inventory the
clusters reached at all.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Mapping, Sequence

from .corpus import GoldAnnotation, KIND_BULLET, KIND_TITLE, Location
from .grouping import AttributeCluster

__all__ = [
    "Alignment",
    "EvalReport",
    "MODE_EXACT",
    "MODE_PARTIAL",
    "ModeScores",
    "adjusted_rand_index",
    "align_spans",
    "coverage_recall",
    "evaluate",
    "normalized_mutual_information",
    "pair_jaccard",
    "pseudo_f1",
    "span_prf",
]

MODE_EXACT = "exact"
MODE_PARTIAL = "partial"


@dataclass
class Alignment:
    """One-to-one matching between predicted and gold spans."""

    mode: str
    pairs: list[tuple[Location, GoldAnnotation]]
    unmatched_predicted: list[Location]
    unmatched_gold: list[GoldAnnotation]


def _overlap(a: Location, b: Location) -> int:
    if a[:3] != b[:3]:
        return 0
    return max(0, min(a[4], b[4]) - max(a[3], b[3]))


def align_spans(
    predicted: Sequence[Location],
    gold: Sequence[GoldAnnotation],
    mode: str = MODE_EXACT,
) -> Alignment:
    """Greedy one-to-one alignment of predicted spans to gold spans.

    ``exact`` pairs spans with identical boundaries. ``partial`` pairs a
    prediction with a gold span covering strictly more than half of the
    prediction's tokens (so every exact match also partial-matches, and
    a prediction can never be torn between two disjoint gold spans).
    Candidate pairs are taken best-first: larger covered fraction, then
    larger overlap, then gold and predicted positions.

    Raises:
        ValueError: On an unknown mode or duplicate predicted locations.
    """
    if mode not in (MODE_EXACT, MODE_PARTIAL):
        raise ValueError(f"unknown alignment mode {mode!r}")
    seen = set()
    for loc in predicted:
        if loc in seen:
            raise ValueError(f"duplicate predicted location {loc}")
        seen.add(loc)

    gold_by_seq: dict[tuple, list[int]] = {}
    for gi, g in enumerate(gold):
        gold_by_seq.setdefault(g.location[:3], []).append(gi)

    candidates: list[tuple[float, int, Location, Location, int, int]] = []
    for pi, ploc in enumerate(predicted):
        plen = ploc[4] - ploc[3]
        for gi in gold_by_seq.get(ploc[:3], ()):
            gloc = gold[gi].location
            ov = _overlap(ploc, gloc)
            if mode == MODE_EXACT:
                if (ploc[3], ploc[4]) != (gloc[3], gloc[4]):
                    continue
            elif 2 * ov <= plen:
                continue
            candidates.append((ov / plen, ov, gloc, ploc, gi, pi))

    candidates.sort(key=lambda t: (-t[0], -t[1], t[2], t[3]))
    used_gold: set[int] = set()
    used_pred: set[int] = set()
    pairs: list[tuple[Location, GoldAnnotation]] = []
    for _, _, _, ploc, gi, pi in candidates:
        if gi in used_gold or pi in used_pred:
            continue
        used_gold.add(gi)
        used_pred.add(pi)
        pairs.append((ploc, gold[gi]))
    pairs.sort(key=lambda pg: pg[1].location)
    return Alignment(
        mode=mode,
        pairs=pairs,
        unmatched_predicted=[p for i, p in enumerate(predicted) if i not in used_pred],
        unmatched_gold=[g for i, g in enumerate(gold) if i not in used_gold],
    )


# ---------------------------------------------------------------------------
# clustering agreement metrics (contingency-table route)


def _check_lengths(pred: Sequence[Hashable], gold: Sequence[Hashable]) -> None:
    if len(pred) != len(gold):
        raise ValueError(f"{len(pred)} predicted labels vs {len(gold)} gold labels")


def _contingency(
    pred: Sequence[Hashable], gold: Sequence[Hashable]
) -> tuple[Counter, Counter, Counter]:
    cells: Counter = Counter(zip(pred, gold))
    rows: Counter = Counter(pred)
    cols: Counter = Counter(gold)
    return cells, rows, cols


def _pair_counts(pred: Sequence[Hashable], gold: Sequence[Hashable]) -> tuple[int, int, int]:
    """(TP, FP, FN) over unordered item pairs: co-clustered in both /
    predicted only / gold only."""
    cells, rows, cols = _contingency(pred, gold)
    tp = sum(math.comb(c, 2) for c in cells.values())
    fp = sum(math.comb(c, 2) for c in rows.values()) - tp
    fn = sum(math.comb(c, 2) for c in cols.values()) - tp
    return tp, fp, fn


def pair_jaccard(pred: Sequence[Hashable], gold: Sequence[Hashable]) -> float:
    """Jaccard index over co-clustered pairs; vacuous case (no pair
    co-clustered anywhere) scores 1.0."""
    _check_lengths(pred, gold)
    tp, fp, fn = _pair_counts(pred, gold)
    denom = tp + fp + fn
    return 1.0 if denom == 0 else tp / denom


def adjusted_rand_index(pred: Sequence[Hashable], gold: Sequence[Hashable]) -> float:
    """Adjusted Rand index; a zero adjustment denominator scores 1.0."""
    _check_lengths(pred, gold)
    n = len(pred)
    if n < 2:
        return 1.0
    cells, rows, cols = _contingency(pred, gold)
    index = sum(math.comb(c, 2) for c in cells.values())
    sum_rows = sum(math.comb(c, 2) for c in rows.values())
    sum_cols = sum(math.comb(c, 2) for c in cols.values())
    expected = sum_rows * sum_cols / math.comb(n, 2)
    maximum = (sum_rows + sum_cols) / 2.0
    denom = maximum - expected
    return 1.0 if denom == 0 else (index - expected) / denom


def _entropy(counts: Counter, n: int) -> float:
    return -sum((c / n) * math.log(c / n) for c in counts.values())


def normalized_mutual_information(
    pred: Sequence[Hashable], gold: Sequence[Hashable]
) -> float:
    """NMI with sqrt normalization and natural log.

    Both sides constant scores 1.0; exactly one side constant scores 0.0.
    """
    _check_lengths(pred, gold)
    n = len(pred)
    if n == 0:
        return 1.0
    cells, rows, cols = _contingency(pred, gold)
    h_pred = _entropy(rows, n)
    h_gold = _entropy(cols, n)
    if h_pred == 0.0 and h_gold == 0.0:
        return 1.0
    if h_pred == 0.0 or h_gold == 0.0:
        return 0.0
    mi = 0.0
    for (p, g), c in cells.items():
        mi += (c / n) * math.log(n * c / (rows[p] * cols[g]))
    return mi / math.sqrt(h_pred * h_gold)


def pseudo_f1(jaccard: float, ari: float, nmi: float, recall: float) -> float:
    """Harmonic mean of coverage recall and the mean of the three
    agreement scores (the pseudo-precision)."""
    precision = (jaccard + ari + nmi) / 3.0
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# report assembly


def _predicted_locations(clusters: Sequence[AttributeCluster]) -> dict[Location, str]:
    out: dict[Location, str] = {}
    for cluster in clusters:
        for member in cluster.members:
            for loc in member.occurrences:
                if loc in out:
                    raise ValueError(f"location {loc} appears in clusters {out[loc]!r} and {cluster.label!r}")
                out[loc] = cluster.label
    return out


def coverage_recall(
    clusters: Sequence[AttributeCluster],
    gold: Sequence[GoldAnnotation],
    mode: str = MODE_EXACT,
) -> float:
    """Fraction of gold spans reached by any cluster occurrence."""
    if not gold:
        return 1.0
    predicted = sorted(_predicted_locations(clusters))
    alignment = align_spans(predicted, gold, mode)
    return len(alignment.pairs) / len(gold)


def span_prf(
    predicted: Sequence[Location],
    gold: Sequence[GoldAnnotation],
    mode: str = MODE_EXACT,
) -> tuple[float, float, float]:
    """Span-level precision/recall/F1 from the one-to-one alignment.

    Empty predicted or gold sides score precision/recall 1.0 (vacuous).
    """
    alignment = align_spans(predicted, gold, mode)
    m = len(alignment.pairs)
    precision = 1.0 if not predicted else m / len(predicted)
    recall = 1.0 if not gold else m / len(gold)
    f1 = 0.0 if precision + recall == 0.0 else 2 * precision * recall / (precision + recall)
    return precision, recall, f1


@dataclass
class ModeScores:
    """Scores for one alignment mode over one gold subset."""

    jaccard: float
    ari: float
    nmi: float
    recall: float
    pseudo_precision: float
    pseudo_f1: float
    span_precision: float
    span_recall: float
    span_f1: float
    matched: int
    predicted: int
    gold: int

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class EvalReport:
    """Overall per-mode scores plus optional per-split breakdowns."""

    modes: dict[str, ModeScores]
    splits: dict[str, dict[str, ModeScores]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "modes": {m: s.to_dict() for m, s in self.modes.items()},
            "splits": {
                name: {m: s.to_dict() for m, s in per_mode.items()}
                for name, per_mode in self.splits.items()
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )


def _score_subset(
    label_of: Mapping[Location, str],
    predicted: Sequence[Location],
    gold: Sequence[GoldAnnotation],
    mode: str,
) -> ModeScores:
    alignment = align_spans(predicted, gold, mode)
    pred_labels = [label_of[loc] for loc, _ in alignment.pairs]
    gold_labels = [g.attribute_type for _, g in alignment.pairs]
    jac = pair_jaccard(pred_labels, gold_labels)
    ari = adjusted_rand_index(pred_labels, gold_labels)
    nmi = normalized_mutual_information(pred_labels, gold_labels)
    recall = 1.0 if not gold else len(alignment.pairs) / len(gold)
    precision, span_recall, f1 = span_prf(predicted, gold, mode)
    return ModeScores(
        jaccard=jac,
        ari=ari,
        nmi=nmi,
        recall=recall,
        pseudo_precision=(jac + ari + nmi) / 3.0,
        pseudo_f1=pseudo_f1(jac, ari, nmi, recall),
        span_precision=precision,
        span_recall=span_recall,
        span_f1=f1,
        matched=len(alignment.pairs),
        predicted=len(predicted),
        gold=len(gold),
    )


def evaluate(
    clusters: Sequence[AttributeCluster],
    gold: Sequence[GoldAnnotation],
    modes: Sequence[str] = (MODE_EXACT, MODE_PARTIAL),
    with_splits: bool = True,
) -> EvalReport:
    """Scores a clustering against gold annotations.

    Agreement metrics (Jaccard/ARI/NMI) are computed over matched items
    only; recall is coverage of the gold inventory. Splits break the
    gold down by seed vs new types and by title vs bullet location (the
    latter also restrict the predicted side to the same kind).
    """
    label_of = _predicted_locations(clusters)
    predicted = sorted(label_of)
    report = EvalReport(modes={}, splits={})
    for mode in modes:
        report.modes[mode] = _score_subset(label_of, predicted, gold, mode)
    if with_splits:
        subsets: dict[str, tuple[list[Location], list[GoldAnnotation]]] = {
            "seed_types": (predicted, [g for g in gold if not g.is_new_type]),
            "new_types": (predicted, [g for g in gold if g.is_new_type]),
            "title": (
                [p for p in predicted if p[1] == KIND_TITLE],
                [g for g in gold if g.location[1] == KIND_TITLE],
            ),
            "bullet": (
                [p for p in predicted if p[1] == KIND_BULLET],
                [g for g in gold if g.location[1] == KIND_BULLET],
            ),
        }
        for name, (pred_subset, gold_subset) in subsets.items():
            report.splits[name] = {
                mode: _score_subset(label_of, pred_subset, gold_subset, mode)
                for mode in modes
            }
    return report
