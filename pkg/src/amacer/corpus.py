"""Product corpus ingestion, seed-profile sanitizing, and seed matching.

Inputs are JSON / JSON-lines files documented in the README. Loaders
validate structure eagerly so later stages can assume well-formed data;
every error names the line or sequence that caused it.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

__all__ = [
    "CorpusError",
    "GoldAnnotation",
    "KIND_BULLET",
    "KIND_TITLE",
    "Location",
    "MAX_SEED_VALUES",
    "MIN_SEED_VALUES",
    "Product",
    "RawProfileEntry",
    "SeedAttribute",
    "SeedOccurrence",
    "SequenceKey",
    "TokenSequence",
    "load_corpus",
    "load_gold",
    "load_raw_profiles",
    "load_seed_set",
    "match_seed_occurrences",
    "sanitize_seed_set",
    "save_seed_set",
]

logger = logging.getLogger(__name__)

KIND_TITLE = "title"
KIND_BULLET = "bullet"

#: (product_id, kind, bullet index, token start, token end) -- end exclusive.
Location = tuple[str, str, int, int, int]

#: (product_id, kind, bullet index) -- identifies one token sequence.
SequenceKey = tuple[str, str, int]

# A usable seed type needs a healthy value inventory but raw profiles
# contain junk tails, so both bounds are enforced during sanitizing.
MIN_SEED_VALUES = 10
MAX_SEED_VALUES = 100


class CorpusError(ValueError):
    """An input file violates its documented schema or an invariant."""


@dataclass(frozen=True)
class TokenSequence:
    """One tokenized, POS-tagged text unit (a title or a single bullet).

    Attributes:
        product_id: Owning product identifier.
        kind: ``"title"`` or ``"bullet"``.
        index: 0 for titles, the bullet ordinal otherwise.
        tokens: Surface tokens, at least one.
        pos: Coarse POS tag per token, same length as ``tokens``.
    """

    product_id: str
    kind: str
    index: int
    tokens: tuple[str, ...]
    pos: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "pos", tuple(self.pos))
        if self.kind not in (KIND_TITLE, KIND_BULLET):
            raise CorpusError(
                f"sequence {self.product_id}/{self.kind}/{self.index}: "
                f"kind must be 'title' or 'bullet'"
            )
        if not self.tokens:
            raise CorpusError(
                f"sequence {self.product_id}/{self.kind}/{self.index}: empty token list"
            )
        if len(self.tokens) != len(self.pos):
            raise CorpusError(
                f"sequence {self.product_id}/{self.kind}/{self.index}: "
                f"{len(self.tokens)} tokens but {len(self.pos)} POS tags"
            )

    @property
    def key(self) -> SequenceKey:
        return (self.product_id, self.kind, self.index)

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Product:
    """A product record: title plus zero or more bullet sequences."""

    product_id: str
    category: str
    title: TokenSequence
    bullets: tuple[TokenSequence, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "bullets", tuple(self.bullets))

    def sequences(self) -> Iterator[TokenSequence]:
        """Yields the title first, then bullets in file order."""
        yield self.title
        yield from self.bullets


@dataclass(frozen=True)
class SeedAttribute:
    """A known attribute type with its sanitized value inventory.

    Values are lowercase surface strings, unique within the attribute.
    """

    type_name: str
    values: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "values", tuple(self.values))
        seen = set()
        for v in self.values:
            if v != v.lower():
                raise CorpusError(f"seed type {self.type_name!r}: value {v!r} not lowercase")
            if v in seen:
                raise CorpusError(f"seed type {self.type_name!r}: duplicate value {v!r}")
            seen.add(v)


@dataclass(frozen=True)
class SeedOccurrence:
    """A seed value matched at a concrete token span."""

    attribute: str
    value: str
    location: Location


@dataclass(frozen=True)
class GoldAnnotation:
    """A human-labelled attribute span used only for evaluation."""

    location: Location
    attribute_type: str
    is_new_type: bool


@dataclass(frozen=True)
class RawProfileEntry:
    """One (category, type, value, frequency) row of a raw attribute profile."""

    category: str
    attribute_type: str
    value: str
    frequency: int


def _read_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path.name} line {lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise CorpusError(f"{path.name} line {lineno}: expected a JSON object")
            yield lineno, obj


def _require(obj: dict, field: str, where: str):
    if field not in obj:
        raise CorpusError(f"{where}: missing field {field!r}")
    return obj[field]


def load_corpus(path: str | Path) -> list[Product]:
    """Loads a product corpus from a JSON-lines file.

    Each line holds ``{"id", "category", "title": {"tokens", "pos"},
    "bullets": [{"tokens", "pos"}, ...]}``. Duplicate product ids are an
    error, as are token/POS length mismatches.
    """
    products: list[Product] = []
    seen_ids: set[str] = set()
    for lineno, obj in _read_jsonl(path):
        where = f"{Path(path).name} line {lineno}"
        pid = _require(obj, "id", where)
        if not isinstance(pid, str) or not pid:
            raise CorpusError(f"{where}: product id must be a non-empty string")
        if pid in seen_ids:
            raise CorpusError(f"{where}: duplicate product id {pid!r}")
        seen_ids.add(pid)
        category = _require(obj, "category", where)
        title_obj = _require(obj, "title", where)
        title = TokenSequence(
            product_id=pid,
            kind=KIND_TITLE,
            index=0,
            tokens=tuple(_require(title_obj, "tokens", f"{where} title")),
            pos=tuple(_require(title_obj, "pos", f"{where} title")),
        )
        bullets = []
        for bidx, bobj in enumerate(obj.get("bullets", [])):
            bullets.append(
                TokenSequence(
                    product_id=pid,
                    kind=KIND_BULLET,
                    index=bidx,
                    tokens=tuple(_require(bobj, "tokens", f"{where} bullet {bidx}")),
                    pos=tuple(_require(bobj, "pos", f"{where} bullet {bidx}")),
                )
            )
        products.append(Product(product_id=pid, category=category, title=title, bullets=tuple(bullets)))
    return products


def load_raw_profiles(path: str | Path) -> list[RawProfileEntry]:
    """Loads raw attribute-profile rows (``{"category", "type", "value", "freq"}`` JSONL)."""
    entries = []
    for lineno, obj in _read_jsonl(path):
        where = f"{Path(path).name} line {lineno}"
        freq = _require(obj, "freq", where)
        if not isinstance(freq, int) or freq < 0:
            raise CorpusError(f"{where}: freq must be a non-negative integer")
        entries.append(
            RawProfileEntry(
                category=str(_require(obj, "category", where)),
                attribute_type=str(_require(obj, "type", where)),
                value=str(_require(obj, "value", where)),
                frequency=freq,
            )
        )
    return entries


def sanitize_seed_set(entries: Sequence[RawProfileEntry]) -> list[SeedAttribute]:
    """Distills raw profile rows into a clean seed set.

    Values are lowercased and frequencies for identical (type, value)
    pairs are summed. Then, in order:

      a. drop attribute types with fewer than 10 distinct values;
      b. for a value listed under several surviving types, keep it only
         under the winner (highest value frequency, then higher type
         total frequency, then lexicographically smaller type name);
      c. re-apply (a); cap each type at its 100 most frequent values
         (ties broken lexicographically); re-apply (a) once more.

    The result is deterministic and idempotent: feeding a sanitized
    table back through changes nothing.
    """
    freq: dict[tuple[str, str], int] = defaultdict(int)
    for e in entries:
        freq[(e.attribute_type, e.value.lower())] += e.frequency

    by_type: dict[str, dict[str, int]] = defaultdict(dict)
    for (tname, value), f in freq.items():
        by_type[tname][value] = by_type[tname].get(value, 0) + f

    def drop_small(table: dict[str, dict[str, int]]) -> dict[str, dict[str, int]]:
        return {t: vals for t, vals in table.items() if len(vals) >= MIN_SEED_VALUES}

    by_type = drop_small(by_type)

    # Step (b): each value belongs to exactly one type afterwards.
    totals = {t: sum(vals.values()) for t, vals in by_type.items()}
    owners: dict[str, list[str]] = defaultdict(list)
    for t, vals in by_type.items():
        for v in vals:
            owners[v].append(t)
    for value, types in owners.items():
        if len(types) < 2:
            continue
        winner = min(types, key=lambda t: (-by_type[t][value], -totals[t], t))
        for t in types:
            if t != winner:
                del by_type[t][value]

    by_type = drop_small(by_type)

    for t, vals in list(by_type.items()):
        if len(vals) > MAX_SEED_VALUES:
            kept = sorted(vals.items(), key=lambda kv: (-kv[1], kv[0]))[:MAX_SEED_VALUES]
            by_type[t] = dict(kept)

    by_type = drop_small(by_type)

    result = []
    for t in sorted(by_type):
        ordered = sorted(by_type[t].items(), key=lambda kv: (-kv[1], kv[0]))
        result.append(SeedAttribute(type_name=t, values=tuple(v for v, _ in ordered)))
    return result


def load_seed_set(path: str | Path) -> list[SeedAttribute]:
    """Loads a seed set: ``{"category", "attributes": [{"type", "values"}]}``.

    Values are lowercased; duplicates within a type are dropped with a
    warning; a value under two types is an error.
    """
    path = Path(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path.name}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise CorpusError(f"{path.name}: expected a JSON object")
    attrs_obj = _require(obj, "attributes", path.name)
    seen_value_owner: dict[str, str] = {}
    attrs: list[SeedAttribute] = []
    for aobj in attrs_obj:
        tname = str(_require(aobj, "type", path.name))
        values: list[str] = []
        for raw in _require(aobj, "values", f"{path.name} type {tname!r}"):
            v = str(raw).lower()
            if v in values:
                logger.warning("seed type %r: dropping duplicate value %r", tname, v)
                continue
            owner = seen_value_owner.get(v)
            if owner is not None and owner != tname:
                raise CorpusError(
                    f"{path.name}: value {v!r} appears under both {owner!r} and {tname!r}"
                )
            seen_value_owner[v] = tname
            values.append(v)
        attrs.append(SeedAttribute(type_name=tname, values=tuple(values)))
    return attrs


def save_seed_set(path: str | Path, category: str, attributes: Sequence[SeedAttribute]) -> None:
    """Writes a seed set in the same JSON shape ``load_seed_set`` reads."""
    payload = {
        "category": category,
        "attributes": [
            {"type": a.type_name, "values": list(a.values)} for a in attributes
        ],
    }
    Path(path).write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def read_seed_category(path: str | Path) -> str:
    """Returns the ``category`` field of a seed-set file."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return str(obj.get("category", ""))


def load_gold(path: str | Path, seed_types: Iterable[str] = ()) -> list[GoldAnnotation]:
    """Loads gold annotations (``{"id", "kind", "index", "start", "end", "type"}`` JSONL).

    ``end`` is exclusive. Annotations marked with a type outside
    ``seed_types`` are flagged ``is_new_type``. Overlapping annotations
    within one sequence are an error.
    """
    seed_set = set(seed_types)
    anns: list[GoldAnnotation] = []
    spans_per_seq: dict[SequenceKey, list[tuple[int, int, int]]] = defaultdict(list)
    for lineno, obj in _read_jsonl(path):
        where = f"{Path(path).name} line {lineno}"
        pid = str(_require(obj, "id", where))
        kind = str(_require(obj, "kind", where))
        if kind not in (KIND_TITLE, KIND_BULLET):
            raise CorpusError(f"{where}: kind must be 'title' or 'bullet'")
        index = _require(obj, "index", where)
        start = _require(obj, "start", where)
        end = _require(obj, "end", where)
        if not (isinstance(start, int) and isinstance(end, int) and 0 <= start < end):
            raise CorpusError(f"{where}: need integer 0 <= start < end")
        tname = str(_require(obj, "type", where))
        spans_per_seq[(pid, kind, index)].append((start, end, lineno))
        anns.append(
            GoldAnnotation(
                location=(pid, kind, index, start, end),
                attribute_type=tname,
                is_new_type=tname not in seed_set,
            )
        )
    for key, spans in spans_per_seq.items():
        spans.sort()
        for (s1, e1, l1), (s2, e2, l2) in zip(spans, spans[1:]):
            if s2 < e1:
                raise CorpusError(
                    f"{Path(path).name}: overlapping gold spans in sequence "
                    f"{key[0]}/{key[1]}/{key[2]} (lines {l1} and {l2})"
                )
    return anns


def match_seed_occurrences(
    products: Sequence[Product], seeds: Sequence[SeedAttribute]
) -> list[SeedOccurrence]:
    """Finds every token-aligned, case-insensitive seed value occurrence.

    Matching is exact on whitespace-tokenized values. When matches
    overlap within a sequence, longer spans win; ties go to the
    earlier start. The result is ordered by product, sequence, start.
    """
    value_owner: dict[tuple[str, ...], tuple[str, str]] = {}
    for attr in seeds:
        for v in attr.values:
            vtokens = tuple(v.split())
            if not vtokens:
                continue
            if vtokens in value_owner:
                raise CorpusError(f"seed value {v!r} appears under two attribute types")
            value_owner[vtokens] = (attr.type_name, v)
    if not value_owner:
        return []
    max_len = max(len(v) for v in value_owner)

    out: list[SeedOccurrence] = []
    for product in products:
        for seq in product.sequences():
            lowered = tuple(t.lower() for t in seq.tokens)
            hits: list[tuple[int, int, str, str]] = []
            for start in range(len(lowered)):
                for length in range(1, min(max_len, len(lowered) - start) + 1):
                    window = lowered[start : start + length]
                    owner = value_owner.get(window)
                    if owner is not None:
                        hits.append((start, start + length, owner[0], owner[1]))
            # longest-first greedy keeps at most one span per token
            hits.sort(key=lambda h: (-(h[1] - h[0]), h[0]))
            taken: list[tuple[int, int]] = []
            for start, end, attr_name, value in hits:
                if any(start < e and s < end for s, e in taken):
                    continue
                taken.append((start, end))
                out.append(
                    SeedOccurrence(
                        attribute=attr_name,
                        value=value,
                        location=(seq.product_id, seq.kind, seq.index, start, end),
                    )
                )
    order: dict[str, int] = {p.product_id: i for i, p in enumerate(products)}
    out.sort(
        key=lambda o: (
            order[o.location[0]],
            0 if o.location[1] == KIND_TITLE else 1,
            o.location[2],
            o.location[3],
        )
    )
    return out
