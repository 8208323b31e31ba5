import random

import pytest

from conftest import random_corpus
from pasrec.domain import SimilarityParams, UserSequence, make_session_window
from pasrec.predictor import exhaustive_top_k, recommend_top_k, score_item
from pasrec.similarity import NeighborIndex, build_neighbor_index, count_pairs


def window_ab():
    return make_session_window(UserSequence.from_items("u", ["a", "b"]), k=2)


def handmade_index(measure, entries_for_t):
    params = SimilarityParams(ell=2, rho=0.2, lam=0.5, n_neighbors=20)
    items = ("a", "b", "t")
    entries = [[], [], entries_for_t]
    return NeighborIndex(measure, params, items, entries)


class TestScoreItem:
    def test_position_aware_lookup_at_stored_position(self):
        index = handmade_index("pas", [(0, 0.3, (0.1, 0.3)), (1, 0.5, (0.2, 0.5))])
        # L(a)=1 -> 0.1, L(b)=2 -> 0.5
        assert score_item(window_ab(), "t", index) == pytest.approx(0.6, abs=1e-15)

    def test_window_disjoint_from_neighborhood_scores_zero(self):
        index = handmade_index("pas", [])
        assert score_item(window_ab(), "t", index) == 0.0

    def test_position_independent_measure_ignores_window_position(self):
        index = handmade_index("bis", [(0, 0.4, ()), (1, 0.5, ())])
        assert score_item(window_ab(), "t", index) == pytest.approx(0.9, abs=1e-15)

    def test_unknown_target_scores_zero(self):
        index = handmade_index("bis", [(0, 0.4, ())])
        assert score_item(window_ab(), "zzz", index) == 0.0


class TestRecommendTopK:
    @pytest.fixture
    def small_index(self, toy_corpus):
        store = count_pairs(toy_corpus, ell_max=2)
        params = SimilarityParams(ell=2, rho=0.2, lam=0.0, n_neighbors=20)
        return build_neighbor_index(store, params, "bis")

    def test_highest_scores_first(self, small_index):
        window = make_session_window(UserSequence.from_items("v3", ["b", "a"]), k=2)
        ranked = recommend_top_k(window, {"b", "c"}, small_index, top_k=2)
        assert [s.item for s in ranked] == ["c", "b"]
        assert ranked[0].score > ranked[1].score >= 0.0

    def test_all_zero_scores_rank_by_identifier(self):
        index = handmade_index("bis", [])
        window = window_ab()
        ranked = recommend_top_k(window, {"z", "y", "x"}, index, top_k=2)
        assert [s.item for s in ranked] == ["x", "y"]
        assert all(s.score == 0.0 for s in ranked)

    def test_top_k_larger_than_candidates_ranks_all(self, small_index):
        window = make_session_window(UserSequence.from_items("v3", ["b", "a"]), k=2)
        ranked = recommend_top_k(window, {"b", "c"}, small_index, top_k=10)
        assert len(ranked) == 2

    def test_empty_candidates_rejected(self, small_index):
        window = make_session_window(UserSequence.from_items("v3", ["b", "a"]), k=2)
        with pytest.raises(ValueError, match="empty"):
            recommend_top_k(window, set(), small_index, top_k=3)

    def test_deterministic(self, small_index):
        window = make_session_window(UserSequence.from_items("v3", ["b", "a"]), k=2)
        first = recommend_top_k(window, {"a", "b", "c"}, small_index, top_k=3)
        second = recommend_top_k(window, {"a", "b", "c"}, small_index, top_k=3)
        assert first == second


class TestInvertedEnumerationEquivalence:
    @pytest.mark.parametrize("measure", ["bis", "pas", "pas_uni", "cosine"])
    def test_matches_exhaustive_scoring(self, measure):
        rng = random.Random(23)
        for trial in range(8):
            corpus = random_corpus(rng, max_users=25, max_items=15, max_len=10)
            store = count_pairs(corpus, ell_max=3)
            params = SimilarityParams(ell=3, rho=0.2, lam=0.5, n_neighbors=4)
            index = build_neighbor_index(store, params, measure)
            items = sorted({i for s in corpus for i in s.items})
            for seq in corpus[:5]:
                window = make_session_window(seq, params.k)
                candidates = set(items) - set(seq.items)
                if not candidates:
                    continue
                ranked = recommend_top_k(window, candidates, index, 5)
                assert ranked == exhaustive_top_k(window, candidates, index, 5)
                # a score sums at most k window similarities, each in [0, 1]
                assert all(0.0 <= s.score <= params.k for s in ranked)
