import random

import pytest
from hypothesis import given, strategies as st

from reference import ref_best_fuzzy_match, ref_levenshtein, ref_similarity
from tableqa.fuzzy import (
    FuzzyConfig,
    best_fuzzy_match,
    correct_name,
    levenshtein,
    similarity,
)

words = st.text(alphabet="abcdeíó ", max_size=10)


class TestSimilarity:
    def test_identity(self):
        assert similarity("enero", "enero") == 100.0

    def test_disjoint(self):
        assert similarity("abc", "xyz") == 0.0

    def test_item_items(self):
        assert abs(similarity("item", "items") - 88.9) < 0.1

    def test_empty_strings(self):
        assert similarity("", "") == 100.0

    @given(words, words)
    def test_matches_reference(self, a, b):
        assert similarity(a, b) == pytest.approx(ref_similarity(a, b))

    @given(words, words)
    def test_symmetric_and_100_iff_equal(self, a, b):
        assert similarity(a, b) == similarity(b, a)
        assert (similarity(a, b) == 100.0) == (a == b)


class TestLevenshtein:
    @given(words, words)
    def test_matches_reference(self, a, b):
        assert levenshtein(a, b) == ref_levenshtein(a, b)


class TestBestFuzzyMatch:
    def test_table1_scenario(self):
        assert best_fuzzy_match(["Enero", "Febrero"], "enero", 90) == "Enero"

    def test_below_threshold(self):
        assert ref_similarity("otro", "enero") < 90
        assert best_fuzzy_match(["Otro"], "enero", 90) is None

    def test_exact_present(self):
        assert best_fuzzy_match(["x", "x", "y"], "x", 90) == "x"

    def test_empty_values(self):
        assert best_fuzzy_match([], "x", 0) is None

    def test_score_equal_threshold_matches(self):
        # 2*9/20 = 90 exactly
        assert similarity("aaaaaaaaaa", "aaaaaaaaab") == 90.0
        assert best_fuzzy_match(["aaaaaaaaab"], "aaaaaaaaaa", 90) == "aaaaaaaaab"
        # 2*6/16 = 75 exactly
        assert similarity("aaaaaaaa", "aaaaaabb") == 75.0
        assert best_fuzzy_match(["aaaaaabb"], "aaaaaaaa", 75) == "aaaaaabb"
        assert best_fuzzy_match(["aaaaaabb"], "aaaaaaaa", 76) is None

    @given(st.lists(st.one_of(st.none(), words,
                              st.floats(allow_nan=False, allow_infinity=False)),
                    max_size=8),
           words, st.integers(0, 100))
    def test_matches_exhaustive_reference(self, values, target, threshold):
        assert best_fuzzy_match(values, target, threshold) == \
            ref_best_fuzzy_match(values, target, threshold)


class TestCorrectName:
    def test_exact_unchanged(self):
        assert correct_name("Edad", ["Edad", "Mes"]) == "Edad"

    def test_accent_correction(self):
        assert correct_name("Mes de realizacion",
                            ["Mes de realización", "Edad"]) == "Mes de realización"

    def test_empty_candidates(self):
        with pytest.raises(ValueError):
            correct_name("x", [])

    def test_tie_broken_by_candidate_order(self):
        assert correct_name("ab", ["ax", "bx"]) == "ax"

    @given(words, st.lists(words, min_size=1, max_size=6))
    def test_result_in_candidates(self, name, candidates):
        result = correct_name(name, candidates)
        assert result in candidates
        if name in candidates:
            assert result == name


def test_fuzzy_config_validates():
    FuzzyConfig(match_threshold=0, filter_threshold=100)
    with pytest.raises(ValueError):
        FuzzyConfig(match_threshold=101)


def test_acceptance_scale_random_pairs():
    rng = random.Random(7)
    alphabet = "abcdeíó"
    for _ in range(1000):
        values = [
            "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
            for _ in range(rng.randint(0, 6))
        ]
        target = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 8)))
        threshold = rng.randint(0, 100)
        assert best_fuzzy_match(values, target, threshold) == \
            ref_best_fuzzy_match(values, target, threshold)
