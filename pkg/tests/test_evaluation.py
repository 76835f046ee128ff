"""Span alignment, clustering agreement metrics, and report assembly."""

from __future__ import annotations

import numpy as np
import pytest
from numpy.testing import assert_allclose

from amacer.corpus import GoldAnnotation
from amacer.evaluation import (
    adjusted_rand_index,
    align_spans,
    coverage_recall,
    evaluate,
    normalized_mutual_information,
    pair_jaccard,
    pseudo_f1,
    span_prf,
)
from amacer.grouping import AttributeCluster, ValuePoint
from oracles import all_label_vectors, ari_reference, jaccard_reference, nmi_reference


def gold(pid, kind, idx, start, end, tname="t", new=False) -> GoldAnnotation:
    return GoldAnnotation(location=(pid, kind, idx, start, end), attribute_type=tname, is_new_type=new)


def cluster(label, origin, *surface_locs) -> AttributeCluster:
    members = tuple(
        ValuePoint(surface=s, vector=np.zeros(0), occurrences=tuple(locs))
        for s, locs in surface_locs
    )
    return AttributeCluster(label=label, origin=origin, members=members)


class TestAlignSpans:
    def test_exact_requires_identical_boundaries(self):
        g = [gold("p", "title", 0, 0, 2)]
        hit = align_spans([("p", "title", 0, 0, 2)], g, "exact")
        miss = align_spans([("p", "title", 0, 0, 3)], g, "exact")
        assert len(hit.pairs) == 1
        assert len(miss.pairs) == 0 and len(miss.unmatched_predicted) == 1

    def test_partial_needs_strict_token_majority(self):
        """A 4-token prediction with exactly half its tokens covered does
        not match; three of four does."""
        g = [gold("p", "title", 0, 0, 2)]
        at_half = align_spans([("p", "title", 0, 0, 4)], g, "partial")
        assert at_half.pairs == []
        g3 = [gold("p", "title", 0, 0, 3)]
        over_half = align_spans([("p", "title", 0, 0, 4)], g3, "partial")
        assert len(over_half.pairs) == 1

    def test_matching_is_one_to_one(self):
        g = [gold("p", "title", 0, 0, 3)]
        preds = [("p", "title", 0, 0, 3), ("p", "title", 0, 1, 3)]
        out = align_spans(preds, g, "partial")
        assert len(out.pairs) == 1
        assert out.pairs[0][0] == ("p", "title", 0, 0, 3)  # full coverage wins

    def test_greedy_prefers_larger_covered_fraction(self):
        g = [gold("p", "title", 0, 0, 2, "a"), gold("p", "title", 0, 3, 9, "b")]
        # pred 1 fully inside gold a; pred 2 straddles with 2/3 in gold b
        preds = [("p", "title", 0, 0, 2), ("p", "title", 0, 3, 6)]
        out = align_spans(preds, g, "partial")
        got = {(p[3], p[4]): a.attribute_type for p, a in out.pairs}
        assert got == {(0, 2): "a", (3, 6): "b"}

    def test_sequences_never_mix(self):
        g = [gold("p", "title", 0, 0, 2)]
        out = align_spans([("p", "bullet", 0, 0, 2)], g, "exact")
        assert out.pairs == []

    def test_duplicate_predictions_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            align_spans([("p", "title", 0, 0, 1)] * 2, [], "exact")

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError, match="mode"):
            align_spans([], [], "fuzzy")

    def test_exact_matches_are_a_subset_of_partial_matches(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            golds, preds = [], []
            for seq in range(2):
                cursor = 0
                while cursor < 18:
                    w = int(rng.integers(1, 4))
                    if rng.random() < 0.5:
                        golds.append(gold("p", "title", seq, cursor, cursor + w))
                    cursor += w + int(rng.integers(0, 2))
                cursor = 0
                while cursor < 18:
                    w = int(rng.integers(1, 4))
                    if rng.random() < 0.5:
                        preds.append(("p", "title", seq, cursor, cursor + w))
                    cursor += w + int(rng.integers(0, 2))
            exact = {(p, a.location) for p, a in align_spans(preds, golds, "exact").pairs}
            partial = {(p, a.location) for p, a in align_spans(preds, golds, "partial").pairs}
            assert exact <= partial


class TestAgreementMetrics:
    def test_identical_partitions_score_one(self):
        labels = ["a", "a", "b", "c", "c", "c"]
        renamed = ["x", "x", "y", "z", "z", "z"]
        assert pair_jaccard(labels, renamed) == 1.0
        assert adjusted_rand_index(labels, renamed) == 1.0
        assert_allclose(normalized_mutual_information(labels, renamed), 1.0, rtol=1e-12)

    def test_crossed_partition_hand_values(self):
        pred, gold_l = ["a", "a", "b", "b"], ["x", "y", "x", "y"]
        assert pair_jaccard(pred, gold_l) == 0.0
        assert_allclose(adjusted_rand_index(pred, gold_l), -0.5, rtol=1e-12)
        assert_allclose(normalized_mutual_information(pred, gold_l), 0.0, atol=1e-12)

    def test_vacuous_conventions(self):
        # all singletons: no co-clustered pair anywhere
        assert pair_jaccard(["a", "b", "c"], ["x", "y", "z"]) == 1.0
        assert adjusted_rand_index(["a", "b", "c"], ["x", "y", "z"]) == 1.0
        # both sides constant vs one side constant
        assert normalized_mutual_information(["a", "a"], ["x", "x"]) == 1.0
        assert normalized_mutual_information(["a", "a"], ["x", "y"]) == 0.0
        assert normalized_mutual_information(["a", "b"], ["x", "x"]) == 0.0

    def test_single_item_and_empty_inputs(self):
        assert pair_jaccard(["a"], ["x"]) == 1.0
        assert adjusted_rand_index(["a"], ["x"]) == 1.0
        assert normalized_mutual_information(["a"], ["x"]) == 1.0
        assert pair_jaccard([], []) == 1.0
        assert adjusted_rand_index([], []) == 1.0
        assert normalized_mutual_information([], []) == 1.0

    def test_length_mismatch_rejected(self):
        for fn in (pair_jaccard, adjusted_rand_index, normalized_mutual_information):
            with pytest.raises(ValueError):
                fn(["a"], ["x", "y"])

    def test_symmetric_in_arguments(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            n = int(rng.integers(2, 9))
            a = [int(x) for x in rng.integers(0, 3, size=n)]
            b = [int(x) for x in rng.integers(0, 3, size=n)]
            assert_allclose(pair_jaccard(a, b), pair_jaccard(b, a), rtol=1e-12)
            assert_allclose(adjusted_rand_index(a, b), adjusted_rand_index(b, a), rtol=1e-12)
            assert_allclose(
                normalized_mutual_information(a, b),
                normalized_mutual_information(b, a),
                rtol=1e-12,
            )

    def test_exhaustive_agreement_with_pair_loop_oracle_short_vectors(self):
        """Every label-vector pair of length <= 4 over <= 3 labels (the
        full length-6 sweep runs in the acceptance suite)."""
        for n in range(1, 5):
            for a in all_label_vectors(n, 3):
                for b in all_label_vectors(n, 3):
                    assert abs(pair_jaccard(a, b) - jaccard_reference(a, b)) < 1e-9
                    assert abs(adjusted_rand_index(a, b) - ari_reference(a, b)) < 1e-9
                    assert abs(
                        normalized_mutual_information(a, b) - nmi_reference(a, b)
                    ) < 1e-9


class TestComposites:
    def test_pseudo_f1_hand_case(self):
        """Perfect agreement but only a quarter of gold covered:
        harmonic mean of 1 and 0.25 is 0.4."""
        assert_allclose(pseudo_f1(1.0, 1.0, 1.0, 0.25), 0.4, rtol=1e-12)

    def test_pseudo_f1_zero_cases(self):
        assert pseudo_f1(0.0, 0.0, 0.0, 0.0) == 0.0
        assert pseudo_f1(1.0, 1.0, 1.0, 0.0) == 0.0

    def test_span_prf_hand_case(self):
        g = [gold("p", "title", 0, 0, 2)]
        preds = [("p", "title", 0, 0, 2), ("p", "title", 0, 4, 6)]
        p, r, f = span_prf(preds, g, "exact")
        assert_allclose((p, r, f), (0.5, 1.0, 2.0 / 3.0), rtol=1e-12)

    def test_span_prf_vacuous_sides(self):
        assert span_prf([], [], "exact") == (1.0, 1.0, 1.0)
        p, r, f = span_prf([], [gold("p", "title", 0, 0, 1)], "exact")
        assert (p, r, f) == (1.0, 0.0, 0.0)


class TestEvaluate:
    def clusters_and_gold(self):
        golds = [
            gold("p1", "title", 0, 0, 2, "color"),
            gold("p1", "bullet", 0, 1, 2, "color"),
            gold("p2", "title", 0, 0, 1, "flavor"),
            gold("p2", "bullet", 0, 0, 2, "origin", new=True),
        ]
        clusters = [
            cluster(
                "color",
                "seed_expansion",
                ("deep red", [("p1", "title", 0, 0, 2)]),
                ("red", [("p1", "bullet", 0, 1, 2)]),
            ),
            cluster("flavor", "seed_expansion", ("mint", [("p2", "title", 0, 0, 1)])),
            cluster("new-0", "discovered", ("andean valley", [("p2", "bullet", 0, 0, 2)])),
        ]
        return clusters, golds

    def test_mirrored_gold_scores_one_everywhere(self):
        clusters, golds = self.clusters_and_gold()
        report = evaluate(clusters, golds)
        for mode in ("exact", "partial"):
            s = report.modes[mode]
            assert s.jaccard == 1.0 and s.ari == 1.0
            assert_allclose(s.nmi, 1.0, rtol=1e-12)
            assert s.recall == 1.0 and s.span_f1 == 1.0
            assert_allclose(s.pseudo_f1, 1.0, rtol=1e-12)

    def test_splits_partition_the_gold(self):
        clusters, golds = self.clusters_and_gold()
        report = evaluate(clusters, golds)
        assert report.splits["seed_types"]["exact"].gold == 3
        assert report.splits["new_types"]["exact"].gold == 1
        assert report.splits["title"]["exact"].gold == 2
        assert report.splits["bullet"]["exact"].gold == 2
        assert report.splits["title"]["exact"].predicted == 2

    def test_empty_clusters_score_zero_recall_with_vacuous_agreement(self):
        _, golds = self.clusters_and_gold()
        report = evaluate([], golds)
        s = report.modes["exact"]
        assert s.recall == 0.0 and s.pseudo_f1 == 0.0
        assert s.jaccard == 1.0 and s.ari == 1.0 and s.nmi == 1.0
        assert s.span_precision == 1.0 and s.span_recall == 0.0

    def test_coverage_recall_counts_matched_gold(self):
        clusters, golds = self.clusters_and_gold()
        assert coverage_recall(clusters, golds, "exact") == 1.0
        assert coverage_recall(clusters[:1], golds, "exact") == 0.5
        assert coverage_recall([], [], "exact") == 1.0

    def test_location_in_two_clusters_rejected(self):
        c = [
            cluster("a", "seed_expansion", ("x", [("p", "title", 0, 0, 1)])),
            cluster("b", "discovered", ("y", [("p", "title", 0, 0, 1)])),
        ]
        with pytest.raises(ValueError, match="appears in clusters"):
            evaluate(c, [])

    def test_report_serializes_to_plain_dict(self, tmp_path):
        clusters, golds = self.clusters_and_gold()
        report = evaluate(clusters, golds)
        path = tmp_path / "report.json"
        report.save(path)
        import json

        obj = json.loads(path.read_text())
        assert obj["modes"]["exact"]["pseudo_f1"] == 1.0
        assert set(obj["splits"]) == {"seed_types", "new_types", "title", "bullet"}

    def test_wrong_labels_lower_agreement_not_recall(self):
        _, golds = self.clusters_and_gold()
        shuffled = [
            cluster(
                "mixed",
                "discovered",
                ("deep red", [("p1", "title", 0, 0, 2)]),
                ("mint", [("p2", "title", 0, 0, 1)]),
                ("red", [("p1", "bullet", 0, 1, 2)]),
                ("andean valley", [("p2", "bullet", 0, 0, 2)]),
            )
        ]
        s = evaluate(shuffled, golds).modes["exact"]
        assert s.recall == 1.0
        assert s.jaccard < 0.5
        assert s.nmi == 0.0  # one big predicted cluster carries no information
