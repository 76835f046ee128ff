"""Corpus loading, seed sanitizing, and seed occurrence matching."""

from __future__ import annotations

import json

import numpy as np
import pytest

from amacer.corpus import (
    CorpusError,
    RawProfileEntry,
    SeedAttribute,
    load_corpus,
    load_gold,
    load_raw_profiles,
    load_seed_set,
    match_seed_occurrences,
    sanitize_seed_set,
)
from conftest import make_product


def entry(t: str, v: str, f: int, cat: str = "c") -> RawProfileEntry:
    return RawProfileEntry(category=cat, attribute_type=t, value=v, frequency=f)


class TestLoadCorpus:
    def test_roundtrip(self, tmp_path):
        row = {
            "id": "p1",
            "category": "tea",
            "title": {"tokens": ["Green", "Tea"], "pos": ["ADJ", "NOUN"]},
            "bullets": [{"tokens": ["very", "tasty"], "pos": ["ADV", "ADJ"]}],
        }
        path = tmp_path / "products.jsonl"
        path.write_text(json.dumps(row) + "\n")
        products = load_corpus(path)
        assert len(products) == 1
        assert products[0].title.tokens == ("Green", "Tea")
        assert products[0].bullets[0].key == ("p1", "bullet", 0)

    def test_malformed_line_names_line_number(self, tmp_path):
        path = tmp_path / "products.jsonl"
        path.write_text('{"id": "p1", "category": "c", "title": {"tokens": ["a"], "pos": ["X"]}}\nnot json\n')
        with pytest.raises(CorpusError, match="line 2"):
            load_corpus(path)

    def test_length_mismatch_names_sequence(self, tmp_path):
        row = {
            "id": "p9",
            "category": "c",
            "title": {"tokens": ["a", "b"], "pos": ["X"]},
        }
        path = tmp_path / "products.jsonl"
        path.write_text(json.dumps(row) + "\n")
        with pytest.raises(CorpusError, match="p9/title/0"):
            load_corpus(path)

    def test_duplicate_product_id_rejected(self, tmp_path):
        row = {"id": "p1", "category": "c", "title": {"tokens": ["a"], "pos": ["X"]}}
        path = tmp_path / "products.jsonl"
        path.write_text(json.dumps(row) + "\n" + json.dumps(row) + "\n")
        with pytest.raises(CorpusError, match="duplicate product id"):
            load_corpus(path)

    def test_empty_token_list_rejected(self, tmp_path):
        row = {"id": "p1", "category": "c", "title": {"tokens": [], "pos": []}}
        path = tmp_path / "products.jsonl"
        path.write_text(json.dumps(row) + "\n")
        with pytest.raises(CorpusError, match="empty token list"):
            load_corpus(path)


class TestSanitizeSeedSet:
    def test_drops_types_below_value_floor(self):
        entries = [entry("big", f"v{i}", 2) for i in range(10)]
        entries += [entry("small", f"w{i}", 9) for i in range(9)]
        out = sanitize_seed_set(entries)
        assert [a.type_name for a in out] == ["big"]

    def test_duplicate_value_goes_to_higher_value_frequency(self):
        entries = [entry("alpha", f"a{i}", 1) for i in range(10)]
        entries += [entry("beta", f"b{i}", 50) for i in range(10)]
        entries += [entry("alpha", "shared", 7), entry("beta", "shared", 4)]
        out = {a.type_name: a.values for a in sanitize_seed_set(entries)}
        assert "shared" in out["alpha"]
        assert "shared" not in out["beta"]

    def test_value_frequency_tie_falls_to_type_total(self):
        # equal value freq; beta's inventory is heavier overall
        entries = [entry("alpha", f"a{i}", 1) for i in range(10)]
        entries += [entry("beta", f"b{i}", 10) for i in range(10)]
        entries += [entry("alpha", "shared", 5), entry("beta", "shared", 5)]
        out = {a.type_name: a.values for a in sanitize_seed_set(entries)}
        assert "shared" in out["beta"]
        assert "shared" not in out["alpha"]

    def test_full_tie_prefers_lexicographic_type(self):
        entries = [entry("beta", f"x{i}", 3) for i in range(10)]
        entries += [entry("alpha", f"y{i}", 3) for i in range(10)]
        entries += [entry("beta", "shared", 5), entry("alpha", "shared", 5)]
        out = {a.type_name: a.values for a in sanitize_seed_set(entries)}
        assert "shared" in out["alpha"]
        assert "shared" not in out["beta"]

    def test_type_dropped_when_dedup_pushes_it_below_floor(self):
        # gamma holds exactly 10 values but loses one to alpha
        entries = [entry("alpha", f"a{i}", 9) for i in range(10)]
        entries += [entry("gamma", f"g{i}", 1) for i in range(9)]
        entries += [entry("alpha", "shared", 8), entry("gamma", "shared", 2)]
        out = sanitize_seed_set(entries)
        assert [a.type_name for a in out] == ["alpha"]

    def test_caps_at_top_100_values(self):
        entries = [entry("wide", f"v{i:03d}", i) for i in range(120)]
        out = sanitize_seed_set(entries)
        values = out[0].values
        assert len(values) == 100
        # the 20 lowest-frequency values fall off
        assert "v019" not in values and "v020" in values and "v119" in values

    def test_cap_ties_break_lexicographically(self):
        entries = [entry("wide", f"v{i:03d}", 1) for i in range(105)]
        out = sanitize_seed_set(entries)
        assert out[0].values == tuple(f"v{i:03d}" for i in range(100))

    def test_lowercasing_merges_frequencies(self):
        entries = [entry("t", f"v{i}", 1) for i in range(10)]
        entries += [entry("t", "Red", 3), entry("t", "red", 4)]
        out = sanitize_seed_set(entries)
        assert out[0].values[0] == "red"  # freq 7 beats the freq-1 tail

    def test_idempotent_on_random_tables(self):
        """Feeding a sanitized table back through changes nothing."""
        rng = np.random.default_rng(11)
        for _ in range(20):
            entries = []
            for t in range(rng.integers(2, 5)):
                for v in range(rng.integers(5, 30)):
                    entries.append(
                        entry(f"t{t}", f"val{rng.integers(0, 40)}", int(rng.integers(1, 9)))
                    )
            first = sanitize_seed_set(entries)
            freq: dict[tuple[str, str], int] = {}
            for e in entries:
                key = (e.attribute_type, e.value.lower())
                freq[key] = freq.get(key, 0) + e.frequency
            again = sanitize_seed_set(
                [
                    entry(a.type_name, v, freq[(a.type_name, v)])
                    for a in first
                    for v in a.values
                ]
            )
            assert again == first

    def test_input_order_does_not_matter(self):
        rng = np.random.default_rng(3)
        entries = [entry(f"t{i % 3}", f"v{rng.integers(0, 25)}", int(rng.integers(1, 6))) for i in range(120)]
        shuffled = list(entries)
        rng.shuffle(shuffled)
        assert sanitize_seed_set(entries) == sanitize_seed_set(shuffled)


class TestMatchSeedOccurrences:
    def seeds(self):
        return [
            SeedAttribute(type_name="flavor", values=("green tea", "tea", "mint")),
            SeedAttribute(type_name="color", values=("red",)),
        ]

    def test_case_insensitive_token_aligned_match(self):
        p = make_product("p1", ["Fresh", "Green", "TEA"], ["ADJ", "ADJ", "NOUN"])
        occs = match_seed_occurrences([p], self.seeds())
        assert [(o.value, o.location[3], o.location[4]) for o in occs] == [("green tea", 1, 3)]

    def test_longer_value_beats_contained_value(self):
        p = make_product("p1", ["green", "tea"], ["ADJ", "NOUN"])
        occs = match_seed_occurrences([p], self.seeds())
        assert [o.value for o in occs] == ["green tea"]

    def test_non_overlapping_matches_all_kept(self):
        p = make_product(
            "p1",
            ["mint", "and", "red", "green", "tea"],
            ["NOUN", "CCONJ", "ADJ", "ADJ", "NOUN"],
        )
        occs = match_seed_occurrences([p], self.seeds())
        assert [(o.value, o.location[3]) for o in occs] == [
            ("mint", 0),
            ("red", 2),
            ("green tea", 3),
        ]

    def test_substring_without_token_boundary_is_not_a_match(self):
        p = make_product("p1", ["minty"], ["ADJ"])
        assert match_seed_occurrences([p], self.seeds()) == []

    def test_occurrences_never_overlap(self):
        """Random corpora over a tiny vocab: matches stay disjoint per sequence."""
        rng = np.random.default_rng(8)
        vocab = ["tea", "green", "mint", "red", "cup", "of"]
        seeds = self.seeds()
        for trial in range(30):
            tokens = [vocab[i] for i in rng.integers(0, len(vocab), size=12)]
            p = make_product(f"p{trial}", tokens, ["X"] * 12)
            occs = match_seed_occurrences([p], seeds)
            spans = sorted((o.location[3], o.location[4]) for o in occs)
            for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
                assert e1 <= s2
            for o in occs:
                s, e = o.location[3], o.location[4]
                assert " ".join(t.lower() for t in tokens[s:e]) == o.value

    def test_result_ordered_by_product_sequence_start(self):
        p1 = make_product(
            "p1", ["red"], ["ADJ"], bullets=[(["mint", "x", "red"], ["NOUN", "X", "ADJ"])]
        )
        p2 = make_product("p2", ["mint"], ["NOUN"])
        occs = match_seed_occurrences([p2, p1], self.seeds())
        keys = [o.location[:4] for o in occs]
        assert keys == [
            ("p2", "title", 0, 0),
            ("p1", "title", 0, 0),
            ("p1", "bullet", 0, 0),
            ("p1", "bullet", 0, 2),
        ]


class TestSeedSetFile:
    def test_load_lowercases_and_drops_duplicates(self, tmp_path):
        path = tmp_path / "seeds.json"
        path.write_text(
            json.dumps(
                {
                    "category": "tea",
                    "attributes": [{"type": "flavor", "values": ["Mint", "mint", "Chai"]}],
                }
            )
        )
        attrs = load_seed_set(path)
        assert attrs[0].values == ("mint", "chai")

    def test_value_under_two_types_is_an_error(self, tmp_path):
        path = tmp_path / "seeds.json"
        path.write_text(
            json.dumps(
                {
                    "category": "tea",
                    "attributes": [
                        {"type": "flavor", "values": ["mint"]},
                        {"type": "color", "values": ["mint"]},
                    ],
                }
            )
        )
        with pytest.raises(CorpusError, match="mint"):
            load_seed_set(path)


class TestLoadGold:
    def test_flags_new_types_and_reads_exclusive_end(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        rows = [
            {"id": "p1", "kind": "title", "index": 0, "start": 0, "end": 2, "type": "flavor"},
            {"id": "p1", "kind": "bullet", "index": 1, "start": 3, "end": 4, "type": "origin"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        gold = load_gold(path, seed_types=["flavor"])
        assert gold[0].location == ("p1", "title", 0, 0, 2)
        assert not gold[0].is_new_type
        assert gold[1].is_new_type

    def test_overlapping_gold_spans_rejected(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        rows = [
            {"id": "p1", "kind": "title", "index": 0, "start": 0, "end": 2, "type": "a"},
            {"id": "p1", "kind": "title", "index": 0, "start": 1, "end": 3, "type": "b"},
        ]
        path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
        with pytest.raises(CorpusError, match="overlapping"):
            load_gold(path)

    def test_bad_span_bounds_rejected(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        path.write_text(json.dumps({"id": "p", "kind": "title", "index": 0, "start": 2, "end": 2, "type": "a"}) + "\n")
        with pytest.raises(CorpusError, match="start < end"):
            load_gold(path)


class TestLoadRawProfiles:
    def test_reads_rows(self, tmp_path):
        path = tmp_path / "profiles.jsonl"
        path.write_text(json.dumps({"category": "tea", "type": "flavor", "value": "Mint", "freq": 3}) + "\n")
        rows = load_raw_profiles(path)
        assert rows[0].value == "Mint" and rows[0].frequency == 3

    def test_negative_frequency_rejected(self, tmp_path):
        path = tmp_path / "profiles.jsonl"
        path.write_text(json.dumps({"category": "c", "type": "t", "value": "v", "freq": -1}) + "\n")
        with pytest.raises(CorpusError, match="freq"):
            load_raw_profiles(path)
