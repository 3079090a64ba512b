import json
from math import comb

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_force_weights
from mcqa import (
    CueScoreTensor,
    FusionWeights,
    decide,
    fuse_scores,
    learn_weights,
    load_weights,
    save_weights,
    simplex_units,
)
from mcqa.errors import (
    BadGridStep,
    CueOrderMismatch,
    DataError,
    DimMismatch,
    EmptyCandidates,
    MissingGold,
    NonFiniteInput,
    UnknownQtype,
)


def weights(w, cues=("a", "b"), qtype="t"):
    return FusionWeights(qtype=qtype, cues=cues, w=np.asarray(w, dtype=np.float64))


class TestFuseScores:
    def test_hand_case(self):
        per_cue = np.array([[0.8, 0.6], [0.8, 0.0]])
        fused = fuse_scores(weights([0.25, 0.75]), per_cue)
        npt.assert_allclose(fused, [0.8, 0.15], atol=1e-15)

    def test_one_hot_weight_returns_that_row_exactly(self):
        rng = np.random.default_rng(0)
        per_cue = rng.standard_normal((3, 5))
        fused = fuse_scores(weights([0.0, 1.0, 0.0], cues=("a", "b", "c")), per_cue)
        npt.assert_array_equal(fused, per_cue[1])

    def test_cue_order_must_match(self):
        per_cue = np.zeros((2, 3))
        fuse_scores(weights([0.5, 0.5]), per_cue, cues=("a", "b"))
        with pytest.raises(CueOrderMismatch):
            fuse_scores(weights([0.5, 0.5]), per_cue, cues=("b", "a"))

    def test_shape_and_finiteness_checks(self):
        with pytest.raises(DimMismatch):
            fuse_scores(weights([0.5, 0.5]), np.zeros((3, 4)))
        with pytest.raises(NonFiniteInput):
            fuse_scores(weights([0.5, 0.5]), np.array([[np.nan, 0.0], [0.0, 0.0]]))

    def test_zscore_rows_normalized_independently(self):
        per_cue = np.array([[1.0, 2.0, 3.0], [10.0, 10.0, 10.0]])
        fused = fuse_scores(weights([0.5, 0.5]), per_cue, normalization="zscore")
        z = (np.array([1.0, 2.0, 3.0]) - 2.0) / np.std([1.0, 2.0, 3.0])
        npt.assert_allclose(fused, 0.5 * z, atol=1e-15)

    def test_zscore_shift_and_scale_invariant(self):
        rng = np.random.default_rng(1)
        per_cue = rng.standard_normal((2, 4))
        base = fuse_scores(weights([0.3, 0.7]), per_cue, normalization="zscore")
        shifted = per_cue * np.array([[2.5], [7.0]]) + np.array([[1.0], [-3.0]])
        again = fuse_scores(weights([0.3, 0.7]), shifted, normalization="zscore")
        npt.assert_allclose(again, base, atol=1e-12)

    def test_unknown_normalization(self):
        with pytest.raises(DataError):
            fuse_scores(weights([1.0], cues=("a",)), np.zeros((1, 2)), normalization="rank")


class TestDecide:
    def test_argmax_with_lowest_index_ties(self):
        assert decide([0.1, 0.9, 0.9]) == 1
        assert decide([0.5]) == 0

    def test_empty_rejected(self):
        with pytest.raises(EmptyCandidates):
            decide([])

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteInput):
            decide([0.1, np.nan])


class TestSimplexGrid:
    def test_two_cue_grid(self):
        m, parts = simplex_units(2, 0.5)
        assert m == 2
        assert sorted(parts) == [(0, 2), (1, 1), (2, 0)]

    def test_single_cue(self):
        m, parts = simplex_units(1, 0.1)
        assert (m, parts) == (10, [(10,)])

    def test_counts_match_stars_and_bars(self):
        for n_cues in (1, 2, 3, 4):
            m, parts = simplex_units(n_cues, 0.25)
            assert len(parts) == comb(m + n_cues - 1, n_cues - 1)
            assert len(set(parts)) == len(parts)
            assert all(sum(p) == m for p in parts)

    def test_grid_step_one_gives_corners(self):
        _, parts = simplex_units(3, 1.0)
        assert sorted(parts) == [(0, 0, 1), (0, 1, 0), (1, 0, 0)]

    def test_bad_grid_steps(self):
        for step in (0.0, -0.1, 1.5, 0.3, float("nan")):
            with pytest.raises(BadGridStep):
                simplex_units(2, step)


def tensor_from(scores, gold, cues=("a", "b"), qtypes=None):
    return CueScoreTensor(
        question_ids=tuple(f"q{i}" for i in range(len(scores))),
        cues=cues,
        scores=[np.asarray(s, dtype=np.float64) for s in scores],
        gold=tuple(gold),
        qtypes=qtypes,
    )


class TestLearnWeights:
    def test_matches_brute_force_oracle_exactly(self):
        rng = np.random.default_rng(2)
        scores = [rng.standard_normal((2, 4)) for _ in range(40)]
        gold = [int(rng.integers(4)) for _ in range(40)]
        tensor = tensor_from(scores, gold)
        for normalization in ("off", "zscore"):
            learned = learn_weights(tensor, "t", 0.1, normalization=normalization)
            oracle_w, oracle_acc = brute_force_weights(tensor, "t", 0.1, normalization=normalization)
            npt.assert_array_equal(learned.w, oracle_w)
            assert learned.val_accuracy == oracle_acc

    def test_prefers_the_informative_cue(self):
        rng = np.random.default_rng(3)
        scores, gold = [], []
        for _ in range(30):
            g = int(rng.integers(4))
            informative = rng.standard_normal(4) * 0.1
            informative[g] += 1.0
            scores.append(np.stack([informative, rng.standard_normal(4)]))
            gold.append(g)
        learned = learn_weights(tensor_from(scores, gold), "t", 0.1)
        assert learned.w[0] >= 0.8
        assert learned.val_accuracy == 1.0

    def test_tie_breaks_to_lexicographically_largest_weights(self):
        # identical rows: every grid point scores the same
        scores = [np.array([[1.0, 0.0], [1.0, 0.0]])] * 5
        learned = learn_weights(tensor_from(scores, [0] * 5), "t", 0.25)
        npt.assert_array_equal(learned.w, [1.0, 0.0])

    def test_qtype_filtering(self):
        rng = np.random.default_rng(4)
        scores = [rng.standard_normal((2, 3)) for _ in range(10)]
        gold = [int(rng.integers(3)) for _ in range(10)]
        qtypes = tuple("ab"[i % 2] for i in range(10))
        tensor = tensor_from(scores, gold, qtypes=qtypes)
        sub = tensor_from(scores[0::2], gold[0::2])
        learned = learn_weights(tensor, "a", 0.5)
        direct = learn_weights(sub, "t", 0.5)
        npt.assert_array_equal(learned.w, direct.w)
        assert learned.val_accuracy == direct.val_accuracy
        with pytest.raises(UnknownQtype):
            learn_weights(tensor, "zzz", 0.5)

    def test_missing_gold_rejected(self):
        scores = [np.zeros((2, 3))]
        tensor = CueScoreTensor(("q0",), ("a", "b"), [np.zeros((2, 3))], gold=(None,))
        with pytest.raises(MissingGold):
            learn_weights(tensor, "t", 0.5)
        with pytest.raises(MissingGold):
            learn_weights(tensor_from(scores, [None]), "t", 0.5)


class TestFusionWeightsType:
    def test_simplex_validation(self):
        with pytest.raises(DataError):
            weights([0.5, 0.6])
        with pytest.raises(DataError):
            weights([-0.1, 1.1])
        with pytest.raises(DataError):
            weights([np.nan, 1.0])
        with pytest.raises(DimMismatch):
            weights([0.5, 0.5], cues=("a",))
        with pytest.raises(DataError):
            FusionWeights(qtype="t", cues=(), w=np.array([]))

    def test_serialization_roundtrip_exact(self, tmp_path):
        by_type = {
            "color": weights([0.3, 0.7], qtype="color"),
            "shape": weights([1.0 / 3.0, 2.0 / 3.0], qtype="shape"),
        }
        path = save_weights(by_type, tmp_path / "fusion.json")
        loaded = load_weights(path)
        assert sorted(loaded) == ["color", "shape"]
        for qtype in by_type:
            npt.assert_array_equal(loaded[qtype].w, by_type[qtype].w)
            assert loaded[qtype].cues == by_type[qtype].cues
        assert loaded["color"].val_accuracy is None

    def test_duplicate_qtype_rejected(self, tmp_path):
        path = tmp_path / "fusion.json"
        entry = weights([0.5, 0.5]).to_dict()
        path.write_text(json.dumps([entry, entry]))
        with pytest.raises(DataError):
            load_weights(path)


class TestCueScoreTensor:
    def test_validation(self):
        with pytest.raises(DimMismatch):
            CueScoreTensor(("q0",), ("a", "b"), [np.zeros((3, 4))])
        with pytest.raises(DimMismatch):
            CueScoreTensor(("q0", "q1"), ("a",), [np.zeros((1, 4))])
        with pytest.raises(NonFiniteInput):
            CueScoreTensor(("q0",), ("a",), [np.array([[np.inf, 1.0]])])

    def test_select_qtype(self):
        tensor = tensor_from(
            [np.zeros((2, 3)), np.ones((2, 4)), np.zeros((2, 3))],
            [0, 1, 2], qtypes=("x", "y", "x"),
        )
        sub = tensor.select_qtype("x")
        assert sub.question_ids == ("q0", "q2")
        assert sub.gold == (0, 2)
        assert len(sub) == 2


@settings(deadline=None, max_examples=40)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.2, 0.25, 0.5, 1.0]))
def test_learned_weights_lie_on_simplex_and_beat_corners(seed, grid_step):
    rng = np.random.default_rng(seed)
    scores = [rng.standard_normal((2, 3)) for _ in range(12)]
    gold = [int(rng.integers(3)) for _ in range(12)]
    tensor = tensor_from(scores, gold)
    learned = learn_weights(tensor, "t", grid_step)
    assert abs(learned.w.sum() - 1.0) <= 1e-9
    assert np.all(learned.w >= 0)
    for corner in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
        correct = sum(
            int(decide(fuse_scores(weights(corner), mat)) == g)
            for mat, g in zip(tensor.scores, tensor.gold)
        )
        assert learned.val_accuracy >= correct / len(scores)
