"""Invariants of the planted synthetic corpus generator."""

import json

import numpy as np
import pytest

from amacer.corpus import (
    load_corpus,
    load_gold,
    load_raw_profiles,
    load_seed_set,
    match_seed_occurrences,
    sanitize_seed_set,
)
from amacer.posgen import generate_corpus_candidates, induce_patterns
from amacer.stopwords import STOPWORDS
from amacer.synth import (
    DESK_RUN_CONFIG,
    FAMILIES,
    HELD_OUT_FAMILIES,
    SEEDED_FAMILIES,
    build_synthetic_corpus,
    write_bundle,
)


class TestVocabulary:
    def test_family_word_pools_are_disjoint(self):
        """No word may serve two families, or provenance would be ambiguous."""
        seen = {}
        for name, (adjs, nouns) in FAMILIES.items():
            for w in adjs + nouns:
                assert w not in seen, f"{w!r} in both {seen.get(w)} and {name}"
                seen[w] = name

    def test_no_value_token_is_a_stopword(self):
        for adjs, nouns in FAMILIES.values():
            for w in adjs + nouns:
                assert w not in STOPWORDS

    def test_family_split(self):
        assert set(SEEDED_FAMILIES) | set(HELD_OUT_FAMILIES) == set(FAMILIES)
        assert not set(SEEDED_FAMILIES) & set(HELD_OUT_FAMILIES)


class TestGeneration:
    def test_counts_and_determinism(self):
        a = build_synthetic_corpus(n_products=50, seed=3)
        b = build_synthetic_corpus(n_products=50, seed=3)
        assert len(a.products) == 50
        assert [p.product_id for p in a.products] == [p.product_id for p in b.products]
        assert a.gold == b.gold
        assert [p.title.tokens for p in a.products] == [p.title.tokens for p in b.products]

    def test_seed_changes_corpus(self):
        a = build_synthetic_corpus(n_products=50, seed=3)
        b = build_synthetic_corpus(n_products=50, seed=4)
        assert [p.title.tokens for p in a.products] != [p.title.tokens for p in b.products]

    def test_twelve_seed_values_per_seeded_family(self):
        bundle = build_synthetic_corpus(n_products=20, seed=0)
        assert [a.type_name for a in bundle.seed_attributes] == list(SEEDED_FAMILIES)
        for attr in bundle.seed_attributes:
            assert len(attr.values) == 12
            assert len(set(attr.values)) == 12

    def test_gold_spans_lie_inside_their_sequences(self):
        bundle = build_synthetic_corpus(n_products=30, seed=1)
        seqs = {}
        for p in bundle.products:
            for s in p.sequences():
                seqs[s.key] = s
        for g in bundle.gold:
            pid, kind, index, start, end = g.location
            seq = seqs[(pid, kind, index)]
            assert 0 <= start < end <= len(seq)

    def test_gold_spans_do_not_overlap(self):
        bundle = build_synthetic_corpus(n_products=40, seed=2)
        per_seq: dict = {}
        for g in bundle.gold:
            pid, kind, index, start, end = g.location
            per_seq.setdefault((pid, kind, index), []).append((start, end))
        for spans in per_seq.values():
            spans.sort()
            for (s1, e1), (s2, e2) in zip(spans, spans[1:]):
                assert s2 >= e1

    def test_gold_surfaces_belong_to_the_annotated_family(self):
        bundle = build_synthetic_corpus(n_products=30, seed=5)
        seqs = {}
        for p in bundle.products:
            for s in p.sequences():
                seqs[s.key] = s
        for g in bundle.gold:
            pid, kind, index, start, end = g.location
            surface = " ".join(seqs[(pid, kind, index)].tokens[start:end])
            assert bundle.value_family[surface] == g.attribute_type

    def test_new_type_flags_mark_exactly_the_held_out_families(self):
        bundle = build_synthetic_corpus(n_products=30, seed=6)
        for g in bundle.gold:
            assert g.is_new_type == (g.attribute_type in HELD_OUT_FAMILIES)

    def test_bullets_are_family_pure(self):
        bundle = build_synthetic_corpus(n_products=40, seed=8)
        per_seq: dict = {}
        for g in bundle.gold:
            pid, kind, index, *_ = g.location
            if kind == "bullet":
                per_seq.setdefault((pid, index), set()).add(g.attribute_type)
        assert per_seq
        for fams in per_seq.values():
            assert len(fams) == 1


class TestPipelineFit:
    """The corpus is built so the span pipeline recovers it exactly."""

    def test_candidates_equal_gold_spans(self):
        bundle = build_synthetic_corpus(n_products=60, seed=9)
        occ = match_seed_occurrences(bundle.products, bundle.seed_attributes)
        patterns = induce_patterns(occ, bundle.products, min_support=2)
        cands = generate_corpus_candidates(bundle.products, patterns, STOPWORDS, max_span_len=8)
        assert {c.location for c in cands} == {g.location for g in bundle.gold}

    def test_induced_patterns_are_the_three_planted_shapes(self):
        bundle = build_synthetic_corpus(n_products=60, seed=10)
        occ = match_seed_occurrences(bundle.products, bundle.seed_attributes)
        patterns = induce_patterns(occ, bundle.products, min_support=2)
        assert {p.tags for p in patterns} == {("ADJ",), ("NOUN",), ("ADJ", "NOUN")}

    def test_every_value_occurs_at_least_min_samples_times(self):
        bundle = build_synthetic_corpus(n_products=200, seed=7)
        seqs = {}
        for p in bundle.products:
            for s in p.sequences():
                seqs[s.key] = s
        counts: dict = {}
        for g in bundle.gold:
            pid, kind, index, start, end = g.location
            surface = " ".join(seqs[(pid, kind, index)].tokens[start:end])
            counts[surface] = counts.get(surface, 0) + 1
        assert len(counts) == 132
        assert min(counts.values()) >= DESK_RUN_CONFIG["grouping"]["min_samples"]

    def test_sanitized_profiles_reproduce_the_seed_set(self):
        bundle = build_synthetic_corpus(n_products=20, seed=11)
        sanitized = sanitize_seed_set(bundle.profiles)
        by_name = {a.type_name: set(a.values) for a in sanitized}
        assert set(by_name) == set(SEEDED_FAMILIES)  # the junk type is dropped
        for attr in bundle.seed_attributes:
            assert by_name[attr.type_name] == set(attr.values)


class TestBundleFiles:
    def test_written_bundle_round_trips_through_the_loaders(self, tmp_path):
        bundle = build_synthetic_corpus(n_products=25, seed=12)
        paths = write_bundle(tmp_path, bundle)
        products = load_corpus(paths["products"])
        assert [p.product_id for p in products] == [p.product_id for p in bundle.products]
        assert products[3].title.tokens == bundle.products[3].title.tokens
        seeds = load_seed_set(paths["seeds"])
        assert {a.type_name: a.values for a in seeds} == {
            a.type_name: a.values for a in bundle.seed_attributes
        }
        gold = load_gold(paths["gold"], seed_types=[a.type_name for a in seeds])
        assert {(g.location, g.attribute_type, g.is_new_type) for g in gold} == {
            (g.location, g.attribute_type, g.is_new_type) for g in bundle.gold
        }
        profiles = load_raw_profiles(paths["profiles"])
        assert profiles == bundle.profiles
        config = json.loads(paths["config"].read_text())
        assert config == DESK_RUN_CONFIG

    def test_rewrite_is_byte_identical(self, tmp_path):
        bundle = build_synthetic_corpus(n_products=10, seed=13)
        p1 = write_bundle(tmp_path / "a", bundle)
        p2 = write_bundle(tmp_path / "b", bundle)
        for key in p1:
            assert p1[key].read_bytes() == p2[key].read_bytes()
