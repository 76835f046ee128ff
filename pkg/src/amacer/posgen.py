"""POS-pattern induction and candidate span generation.

Seed occurrences are turned into compacted POS-tag patterns; the
patterns then license new candidate spans anywhere in the corpus,
subject to stopword/punctuation filtering and overlap resolution.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import CorpusError, Location, Product, SeedOccurrence, TokenSequence

__all__ = [
    "CandidateSpan",
    "PUNCT_TAG",
    "PosPattern",
    "compact_pos",
    "generate_candidates",
    "generate_corpus_candidates",
    "induce_patterns",
    "load_candidates",
    "load_patterns",
    "resolve_overlaps",
    "save_candidates",
    "save_patterns",
]

logger = logging.getLogger(__name__)

PUNCT_TAG = "PUNCT"


@dataclass(frozen=True)
class PosPattern:
    """A compacted POS-tag sequence with its seed-occurrence support count."""

    tags: tuple[str, ...]
    support: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "tags", tuple(self.tags))
        if not self.tags:
            raise ValueError("empty POS pattern")
        if self.support < 1:
            raise ValueError(f"pattern {self.tags}: support must be >= 1")
        for a, b in zip(self.tags, self.tags[1:]):
            if a == b:
                raise ValueError(f"pattern {self.tags}: consecutive duplicate tag {a!r}")


@dataclass(frozen=True)
class CandidateSpan:
    """A span licensed by a POS pattern, identified by its location.

    ``surface`` is the lowercased space-joined token string; spans with
    the same surface are treated as occurrences of one value.
    """

    location: Location
    surface: str
    pattern: PosPattern


def compact_pos(tags: Sequence[str]) -> tuple[str, ...]:
    """Collapses runs of identical consecutive tags to a single tag.

    ``["ADJ", "ADJ", "NOUN"] -> ("ADJ", "NOUN")``. The result never
    contains two equal adjacent tags.
    """
    out: list[str] = []
    for tag in tags:
        if not out or out[-1] != tag:
            out.append(tag)
    return tuple(out)


def induce_patterns(
    occurrences: Sequence[SeedOccurrence],
    products: Sequence[Product],
    min_support: int = 2,
    include_punct: bool = False,
) -> list[PosPattern]:
    """Derives compacted POS patterns from seed occurrences.

    Each occurrence contributes the compacted tag sequence of its span.
    Patterns containing ``PUNCT`` are discarded unless
    ``include_punct``; patterns below ``min_support`` are dropped. The
    result is sorted by support (descending), then tags.

    Raises:
        CorpusError: If an occurrence points outside its sequence.
    """
    seqs: dict[tuple, TokenSequence] = {}
    for p in products:
        for seq in p.sequences():
            seqs[seq.key] = seq

    counts: Counter[tuple[str, ...]] = Counter()
    for occ in occurrences:
        pid, kind, index, start, end = occ.location
        seq = seqs.get((pid, kind, index))
        if seq is None:
            raise CorpusError(f"occurrence {occ.location}: no such sequence in corpus")
        if not (0 <= start < end <= len(seq)):
            raise CorpusError(
                f"occurrence {occ.location}: span out of bounds for sequence of "
                f"length {len(seq)}"
            )
        tags = compact_pos(seq.pos[start:end])
        if PUNCT_TAG in tags and not include_punct:
            continue
        counts[tags] += 1

    patterns = [
        PosPattern(tags=tags, support=support)
        for tags, support in counts.items()
        if support >= min_support
    ]
    patterns.sort(key=lambda p: (-p.support, p.tags))
    return patterns


def _is_punct(token: str, tag: str) -> bool:
    return tag == PUNCT_TAG or not any(ch.isalnum() for ch in token)


def resolve_overlaps(spans: Sequence[CandidateSpan]) -> list[CandidateSpan]:
    """Greedy overlap resolution within one sequence.

    Longer spans win; ties prefer the earlier start, then the higher
    pattern support. Survivors are returned sorted by start. All spans
    must belong to the same sequence.
    """
    keys = {s.location[:3] for s in spans}
    if len(keys) > 1:
        raise ValueError(f"spans from multiple sequences: {sorted(keys)}")
    ranked = sorted(
        spans,
        key=lambda s: (
            -(s.location[4] - s.location[3]),
            s.location[3],
            -s.pattern.support,
        ),
    )
    taken: list[tuple[int, int]] = []
    kept: list[CandidateSpan] = []
    for span in ranked:
        start, end = span.location[3], span.location[4]
        if any(start < e and s < end for s, e in taken):
            continue
        taken.append((start, end))
        kept.append(span)
    kept.sort(key=lambda s: s.location[3])
    return kept


def generate_candidates(
    sequence: TokenSequence,
    patterns: Iterable[PosPattern],
    stopwords: frozenset[str] | set[str],
    max_span_len: int = 8,
) -> list[CandidateSpan]:
    """Enumerates candidate spans of one sequence.

    A span qualifies when its compacted POS sequence equals some
    pattern's tags, it is at most ``max_span_len`` tokens, its first and
    last tokens are neither stopwords nor punctuation, and not every
    token is a stopword. Overlaps are then resolved longest-first.
    """
    if max_span_len < 1:
        raise ValueError("max_span_len must be >= 1")
    by_tags: dict[tuple[str, ...], PosPattern] = {}
    for pat in patterns:
        prev = by_tags.get(pat.tags)
        if prev is None or pat.support > prev.support:
            by_tags[pat.tags] = pat
    if not by_tags:
        return []

    lowered = [t.lower() for t in sequence.tokens]
    spans: list[CandidateSpan] = []
    n = len(sequence)
    for start in range(n):
        for end in range(start + 1, min(start + max_span_len, n) + 1):
            pat = by_tags.get(compact_pos(sequence.pos[start:end]))
            if pat is None:
                continue
            first, last = lowered[start], lowered[end - 1]
            if first in stopwords or last in stopwords:
                continue
            if _is_punct(sequence.tokens[start], sequence.pos[start]) or _is_punct(
                sequence.tokens[end - 1], sequence.pos[end - 1]
            ):
                continue
            if all(t in stopwords for t in lowered[start:end]):
                continue
            spans.append(
                CandidateSpan(
                    location=(
                        sequence.product_id,
                        sequence.kind,
                        sequence.index,
                        start,
                        end,
                    ),
                    surface=" ".join(lowered[start:end]),
                    pattern=pat,
                )
            )
    return resolve_overlaps(spans)


def generate_corpus_candidates(
    products: Sequence[Product],
    patterns: Iterable[PosPattern],
    stopwords: frozenset[str] | set[str],
    max_span_len: int = 8,
) -> list[CandidateSpan]:
    """Runs ``generate_candidates`` over every sequence of every product."""
    pats = list(patterns)
    out: list[CandidateSpan] = []
    for product in products:
        for seq in product.sequences():
            out.extend(generate_candidates(seq, pats, stopwords, max_span_len))
    return out


def save_patterns(path: str | Path, patterns: Sequence[PosPattern]) -> None:
    """Writes patterns as JSONL rows ``{"tags": [...], "support": n}``."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for pat in patterns:
            fh.write(json.dumps({"tags": list(pat.tags), "support": pat.support}) + "\n")


def load_patterns(path: str | Path) -> list[PosPattern]:
    """Reads a pattern file written by ``save_patterns``."""
    patterns = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                patterns.append(PosPattern(tags=tuple(obj["tags"]), support=int(obj["support"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{Path(path).name} line {lineno}: {exc}") from exc
    return patterns


def save_candidates(path: str | Path, candidates: Sequence[CandidateSpan]) -> None:
    """Writes candidate spans as JSONL, one row per occurrence."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for c in candidates:
            pid, kind, index, start, end = c.location
            row = {
                "id": pid,
                "kind": kind,
                "index": index,
                "start": start,
                "end": end,
                "surface": c.surface,
                "tags": list(c.pattern.tags),
                "support": c.pattern.support,
            }
            fh.write(json.dumps(row) + "\n")


def load_candidates(path: str | Path) -> list[CandidateSpan]:
    """Reads a candidate file written by ``save_candidates``."""
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out.append(
                    CandidateSpan(
                        location=(
                            str(obj["id"]),
                            str(obj["kind"]),
                            int(obj["index"]),
                            int(obj["start"]),
                            int(obj["end"]),
                        ),
                        surface=str(obj["surface"]),
                        pattern=PosPattern(tags=tuple(obj["tags"]), support=int(obj["support"])),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"{Path(path).name} line {lineno}: {exc}") from exc
    return out
