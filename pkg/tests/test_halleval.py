"""Tests for hallucination metrics and token-class attribution."""

import numpy as np
import pytest

from visdep.dependence import DependenceProfile, TokenClass, classify
from visdep.halleval import (
    ClassDistanceStats,
    HallucinationReport,
    ObjectLexicon,
    class_object_counts,
    co_occurrence,
    evaluate,
    score_response,
    span_class,
)
from visdep.synth import OBJECT_BASE, object_token

LEX = ObjectLexicon.for_token_vocab(40)


def profile_for(d_values, sample_id="s"):
    return DependenceProfile(
        sample_id=sample_id,
        d=tuple(float(v) for v in d_values),
        classes=tuple(classify(v) for v in d_values),
    )


def naive_report(responses, truths):
    """Independent recount of every metric with plain loops."""

    def mentioned_objects(resp):
        return [t - OBJECT_BASE for t in resp if OBJECT_BASE <= t < OBJECT_BASE + 40]

    n = len(responses)
    bad_responses = 0
    bad_mentions = 0
    total_mentions = 0
    recalled = 0
    truth_total = 0
    total_len = 0
    for resp, truth in zip(responses, truths):
        truth = set(truth)
        ms = mentioned_objects(resp)
        bad = sum(1 for o in ms if o not in truth)
        bad_mentions += bad
        total_mentions += len(ms)
        if bad > 0:
            bad_responses += 1
        recalled += len(set(ms) & truth)
        truth_total += len(truth)
        total_len += len(resp)
    return {
        "chair_s": bad_responses / n,
        "chair_i": bad_mentions / total_mentions if total_mentions else 0.0,
        "recall": recalled / truth_total if truth_total else 0.0,
        "mean_len": total_len / n,
        "n_samples": n,
    }


class TestObjectLexicon:
    def test_token_lexicon_finds_mentions_in_order(self):
        tokens = [0, object_token(3), 5, object_token(9), 1]
        assert LEX.mentions(tokens) == [(1, 3), (3, 9)]

    def test_surface_lexicon_is_case_insensitive(self):
        lex = ObjectLexicon.from_surfaces({"Dog": 0, "cat": 1})
        tokens = [10, 11, 12]
        surfaces = ["the", "DOG", "Cat"]
        assert lex.mentions(tokens, surfaces) == [(1, 0), (2, 1)]

    def test_surface_lexicon_requires_surfaces(self):
        lex = ObjectLexicon.from_surfaces({"dog": 0})
        with pytest.raises(ValueError):
            lex.mentions([1, 2])

    def test_surface_length_mismatch_rejected(self):
        lex = ObjectLexicon.from_surfaces({"dog": 0})
        with pytest.raises(ValueError):
            lex.mentions([1, 2], ["dog"])

    def test_exactly_one_mapping_required(self):
        with pytest.raises(ValueError):
            ObjectLexicon()
        with pytest.raises(ValueError):
            ObjectLexicon(by_token={1: 0}, by_surface={"a": 0})


class TestScoreResponse:
    def test_grounded_subset_has_no_hallucinations(self):
        tokens = [0, object_token(3), object_token(7), 1]
        mentioned, halluc = score_response(tokens, {3, 7, 11}, LEX)
        assert mentioned == {3, 7}
        assert halluc == frozenset()

    def test_unknown_object_is_hallucinated(self):
        tokens = [0, object_token(3), object_token(8), 1]
        mentioned, halluc = score_response(tokens, {3, 7}, LEX)
        assert mentioned == {3, 8}
        assert halluc == {8}

    def test_empty_response(self):
        mentioned, halluc = score_response([], {3}, LEX)
        assert mentioned == frozenset()
        assert halluc == frozenset()


class TestEvaluate:
    def test_one_bad_response_out_of_two(self):
        responses = [
            [0, object_token(3), 1],
            [0, object_token(8), 1],
        ]
        truths = [{3}, {5}]
        report = evaluate(responses, truths, LEX)
        assert report.chair_s == 0.5
        assert report.chair_i == 0.5
        assert report.n_samples == 2

    def test_all_perfect_responses(self):
        responses = [
            [0, object_token(3), object_token(7), 1],
            [0, object_token(5), 1],
        ]
        truths = [{3, 7}, {5}]
        report = evaluate(responses, truths, LEX)
        assert report.chair_s == 0.0
        assert report.chair_i == 0.0
        assert report.recall == 1.0
        assert report.mean_len == 3.5

    def test_recall_pools_over_all_samples(self):
        """Recall divides recovered objects by total truth objects, not by
        averaging per-sample rates."""
        responses = [
            [object_token(0)],
            [object_token(2)],
        ]
        truths = [{0}, {2, 3, 4}]
        report = evaluate(responses, truths, LEX)
        assert report.recall == pytest.approx(2 / 4)

    def test_repeated_hallucinated_mention_counts_every_time(self):
        responses = [[object_token(9), 4, object_token(9), object_token(1)]]
        report = evaluate(responses, [{1}], LEX)
        assert report.chair_i == pytest.approx(2 / 3)
        assert report.chair_s == 1.0

    def test_no_mentions_at_all(self):
        report = evaluate([[0, 4, 1]], [{3}], LEX)
        assert report.chair_i == 0.0
        assert report.chair_s == 0.0
        assert report.recall == 0.0

    def test_zero_samples_rejected(self):
        with pytest.raises(ValueError):
            evaluate([], [], LEX)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            evaluate([[1]], [{1}, {2}], LEX)

    def test_matches_naive_recount_on_randomized_responses(self):
        """Fifty random responses, recounted independently."""
        rng = np.random.default_rng(42)
        responses, truths = [], []
        for _ in range(50):
            truth = set(int(o) for o in rng.choice(40, size=rng.integers(3, 7), replace=False))
            length = int(rng.integers(1, 25))
            resp = [
                int(object_token(rng.integers(0, 40))) if rng.random() < 0.4 else int(rng.integers(0, 13))
                for _ in range(length)
            ]
            responses.append(resp)
            truths.append(truth)
        report = evaluate(responses, truths, LEX)
        expected = naive_report(responses, truths)
        for field, value in expected.items():
            assert getattr(report, field) == pytest.approx(value, rel=1e-12), field

    def test_adding_a_hallucinated_mention_never_improves_rates(self):
        rng = np.random.default_rng(7)
        responses = [[object_token(int(o)) for o in rng.choice(10, size=3, replace=False)] for _ in range(20)]
        truths = [set(range(10)) for _ in range(20)]
        base = evaluate(responses, truths, LEX)
        worse = [list(r) for r in responses]
        worse[4].append(object_token(30))
        bumped = evaluate(worse, truths, LEX)
        assert bumped.chair_s >= base.chair_s
        assert bumped.chair_i >= base.chair_i

    def test_surface_based_evaluation(self):
        lex = ObjectLexicon.from_surfaces({"dog": 0, "cat": 1})
        responses = [[100, 101, 102]]
        surfaces = [["a", "dog", "cat"]]
        report = evaluate(responses, [{0}], lex, surfaces=surfaces)
        assert report.chair_s == 1.0
        assert report.chair_i == 0.5
        assert report.recall == 1.0


class TestHallucinationReport:
    def test_round_trips_through_dict(self):
        report = HallucinationReport(
            chair_s=0.25, chair_i=0.1, recall=0.8, mean_len=12.5, n_samples=4
        )
        assert HallucinationReport.from_dict(report.to_dict()) == report

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"chair_s": 1.5},
            {"chair_i": -0.1},
            {"recall": 2.0},
            {"mean_len": -1.0},
            {"n_samples": 0},
        ],
    )
    def test_rejects_invalid_fields(self, kwargs):
        base = dict(chair_s=0.0, chair_i=0.0, recall=1.0, mean_len=5.0, n_samples=1)
        base.update(kwargs)
        with pytest.raises(ValueError):
            HallucinationReport(**base)


class TestSpanClass:
    def test_single_token_span(self):
        profile = profile_for([0.9, 0.0, -0.9])
        assert span_class(profile, (0,)) is TokenClass.IMAGE_POSITIVE
        assert span_class(profile, (1,)) is TokenClass.IMAGE_INVARIANT
        assert span_class(profile, (2,)) is TokenClass.IMAGE_NEGATIVE

    def test_highest_magnitude_wins(self):
        profile = profile_for([0.1, 0.8])
        assert span_class(profile, (0, 1)) is TokenClass.IMAGE_POSITIVE
        profile = profile_for([-0.9, 0.3])
        assert span_class(profile, (0, 1)) is TokenClass.IMAGE_NEGATIVE

    def test_tie_resolves_to_earlier_position(self):
        profile = profile_for([0.5, -0.5])
        assert span_class(profile, (0, 1)) is TokenClass.IMAGE_POSITIVE
        profile = profile_for([-0.5, 0.5])
        assert span_class(profile, (0, 1)) is TokenClass.IMAGE_NEGATIVE

    def test_empty_span_rejected(self):
        with pytest.raises(ValueError):
            span_class(profile_for([0.5]), ())

    def test_out_of_range_position_rejected(self):
        with pytest.raises(ValueError):
            span_class(profile_for([0.5]), (1,))


class TestClassObjectCounts:
    def test_hand_built_tally(self):
        resp = [object_token(3), 5, object_token(8)]
        profile = profile_for([0.9, 0.0, -0.9])
        counts = class_object_counts([profile], [resp], [{3}], LEX)
        assert counts.grounded[TokenClass.IMAGE_POSITIVE] == 1
        assert counts.hallucinated[TokenClass.IMAGE_NEGATIVE] == 1
        assert counts.total_grounded == 1
        assert counts.total_hallucinated == 1

    def test_conserves_evaluate_totals(self):
        """Class tallies partition exactly the mentions evaluate() counts."""
        rng = np.random.default_rng(42)
        responses, truths, profiles = [], [], []
        for i in range(30):
            length = int(rng.integers(2, 15))
            resp = [
                int(object_token(rng.integers(0, 40))) if rng.random() < 0.5 else int(rng.integers(0, 13))
                for _ in range(length)
            ]
            truth = set(int(o) for o in rng.choice(40, size=4, replace=False))
            responses.append(resp)
            truths.append(truth)
            profiles.append(profile_for(rng.uniform(-1, 1, length), sample_id=f"s{i}"))
        counts = class_object_counts(profiles, responses, truths, LEX)
        all_mentions = sum(
            1 for r in responses for t in r if OBJECT_BASE <= t < OBJECT_BASE + 40
        )
        bad_mentions = sum(
            1
            for r, tr in zip(responses, truths)
            for t in r
            if OBJECT_BASE <= t < OBJECT_BASE + 40 and (t - OBJECT_BASE) not in tr
        )
        assert counts.total_grounded + counts.total_hallucinated == all_mentions
        assert counts.total_hallucinated == bad_mentions

    def test_misaligned_profile_rejected(self):
        profile = profile_for([0.5, 0.5])
        with pytest.raises(ValueError):
            class_object_counts([profile], [[object_token(1)]], [{1}], LEX)


class TestCoOccurrence:
    def test_distances_to_each_class(self):
        """A hallucinated mention measures its gap to every class."""
        resp = [object_token(3), 10, 11, object_token(9)]
        profile = profile_for([0.9, 0.0, 0.0, -0.9])
        hist = co_occurrence([profile], [resp], [{3}], LEX, window=3)
        inv = hist.per_class[TokenClass.IMAGE_INVARIANT]
        pos = hist.per_class[TokenClass.IMAGE_POSITIVE]
        neg = hist.per_class[TokenClass.IMAGE_NEGATIVE]
        assert inv.counts[1] == 1      # nearest flat token one slot away
        assert pos.counts[3] == 1      # grounded mention three slots away
        assert neg.counts[0] == 1      # the mention itself is anti-visual

    def test_self_distance_is_zero(self):
        resp = [object_token(5)]
        profile = profile_for([-0.9])
        hist = co_occurrence([profile], [resp], [set()], LEX, window=2)
        assert hist.per_class[TokenClass.IMAGE_NEGATIVE].counts[0] == 1

    def test_absent_class_is_tracked_separately(self):
        """With no positive token anywhere, the mention lands in absent
        and the within-window fraction for that class stays undefined."""
        resp = [object_token(5), 10]
        profile = profile_for([-0.9, 0.0])
        hist = co_occurrence([profile], [resp], [set()], LEX, window=3)
        pos = hist.per_class[TokenClass.IMAGE_POSITIVE]
        assert pos.absent == 1
        assert sum(pos.counts) == 0
        assert pos.fraction_within is None

    def test_beyond_window_mentions_counted(self):
        resp = [object_token(0)] + [10] * 6 + [object_token(9)]
        d = [0.9] + [0.0] * 6 + [-0.9]
        profile = profile_for(d)
        hist = co_occurrence([profile], [resp], [{0}], LEX, window=3)
        pos = hist.per_class[TokenClass.IMAGE_POSITIVE]
        assert pos.beyond == 1
        assert pos.fraction_within == 0.0

    def test_grounded_mentions_are_ignored(self):
        resp = [object_token(3)]
        profile = profile_for([0.9])
        hist = co_occurrence([profile], [resp], [{3}], LEX, window=3)
        assert hist.total_mentions() == 0

    def test_every_mention_lands_somewhere(self):
        """counts + beyond + absent adds up to the hallucinated mentions,
        for every class."""
        rng = np.random.default_rng(42)
        responses, truths, profiles = [], [], []
        for i in range(25):
            length = int(rng.integers(1, 20))
            resp = [
                int(object_token(rng.integers(0, 40))) if rng.random() < 0.5 else int(rng.integers(0, 13))
                for _ in range(length)
            ]
            responses.append(resp)
            truths.append(set(int(o) for o in rng.choice(40, size=3, replace=False)))
            profiles.append(profile_for(rng.uniform(-1, 1, length), sample_id=f"s{i}"))
        hist = co_occurrence(profiles, responses, truths, LEX, window=3)
        halluc = sum(
            1
            for r, tr in zip(responses, truths)
            for t in r
            if OBJECT_BASE <= t < OBJECT_BASE + 40 and (t - OBJECT_BASE) not in tr
        )
        for cls in TokenClass:
            stats = hist.per_class[cls]
            assert sum(stats.counts) + stats.beyond + stats.absent == halluc
        assert hist.total_mentions() == halluc

    def test_rejects_negative_window(self):
        with pytest.raises(ValueError):
            co_occurrence([], [], [], LEX, window=-1)

    def test_rejects_misaligned_profile(self):
        profile = profile_for([0.5])
        with pytest.raises(ValueError):
            co_occurrence([profile], [[1, 2]], [set()], LEX)

    def test_fraction_within_arithmetic(self):
        stats = ClassDistanceStats(counts=(1, 2, 0, 1), beyond=2, absent=5)
        assert stats.fraction_within == pytest.approx(4 / 6)
        empty = ClassDistanceStats(counts=(0, 0), beyond=0, absent=3)
        assert empty.fraction_within is None
