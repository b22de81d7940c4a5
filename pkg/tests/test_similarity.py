import json
import random

import numpy as np
import pytest

from musicdialog.similarity import (
    FactorModel,
    InteractionMatrix,
    SimilarityError,
    als_fit,
    load_interactions,
    topk_similar_items,
    weighted_loss,
    write_neighbors,
)


def random_matrix(rng, n_users=20, n_items=30, density=0.15):
    entries = [
        (u, i, float(rng.randint(1, 5)))
        for u in range(n_users)
        for i in range(n_items)
        if rng.random() < density
    ]
    if not entries:
        entries = [(0, 0, 1.0)]
    return InteractionMatrix(n_users, n_items, entries)


class TestInteractionMatrix:
    def test_rejects_out_of_range(self):
        with pytest.raises(SimilarityError):
            InteractionMatrix(2, 2, [(2, 0, 1.0)])

    def test_rejects_duplicates(self):
        with pytest.raises(SimilarityError):
            InteractionMatrix(2, 2, [(0, 0, 1.0), (0, 0, 2.0)])

    def test_rejects_nonpositive_counts(self):
        with pytest.raises(SimilarityError):
            InteractionMatrix(2, 2, [(0, 0, 0.0)])


class TestWeightedLoss:
    def test_zero_factors(self):
        m = InteractionMatrix(2, 3, [(0, 1, 2.0), (1, 2, 1.0)])
        model = FactorModel(U=np.zeros((2, 2)), V=np.zeros((3, 2)), reg=0.0, alpha=3.0)
        # every observed cell contributes (1 + alpha*count) * 1^2
        assert weighted_loss(model, m) == pytest.approx((1 + 6.0) + (1 + 3.0))

    def test_perfect_reconstruction_dense(self):
        # all cells observed, preference 1 everywhere, factors reproduce exactly
        m = InteractionMatrix(2, 2, [(u, i, 1.0) for u in range(2) for i in range(2)])
        model = FactorModel(U=np.ones((2, 1)), V=np.ones((2, 1)), reg=0.0, alpha=1.0)
        assert weighted_loss(model, m) == pytest.approx(0.0)

    def test_hand_computed_2x2(self):
        # single observation at (0,0) count=1, alpha=1 -> c00=2, others c=1, p=0
        m = InteractionMatrix(2, 2, [(0, 0, 1.0)])
        U = np.array([[0.5], [0.25]])
        V = np.array([[0.4], [0.2]])
        model = FactorModel(U=U, V=V, reg=0.0, alpha=1.0)
        expected = (
            2 * (1 - 0.5 * 0.4) ** 2
            + (0 - 0.5 * 0.2) ** 2
            + (0 - 0.25 * 0.4) ** 2
            + (0 - 0.25 * 0.2) ** 2
        )
        assert weighted_loss(model, m) == pytest.approx(expected, abs=1e-12)

    def test_dimension_mismatch(self):
        m = InteractionMatrix(2, 2, [(0, 0, 1.0)])
        model = FactorModel(U=np.zeros((3, 1)), V=np.zeros((2, 1)), reg=0.0, alpha=1.0)
        with pytest.raises(SimilarityError):
            weighted_loss(model, m)


class TestAlsFit:
    def test_rank1_fit(self):
        # outer product of indicator vectors: users 0-4 interact with items 0-9
        entries = [(u, i, 1.0) for u in range(5) for i in range(10)]
        m = InteractionMatrix(8, 12, entries)
        model = als_fit(m, d=1, reg=1e-6, alpha=40.0, iters=10, seed=3)
        assert weighted_loss(model, m) < 1e-3

    def test_loss_monotone_over_sweeps(self):
        rng = random.Random(5)
        for trial in range(5):
            m = random_matrix(rng)
            trace = []
            als_fit(m, d=4, reg=0.05, alpha=10.0, iters=6, seed=trial, loss_trace=trace)
            for prev, cur in zip(trace, trace[1:]):
                assert cur <= prev * (1 + 1e-9) + 1e-12

    def test_deterministic_given_seed(self):
        m = random_matrix(random.Random(1))
        a = als_fit(m, d=3, reg=0.1, alpha=5.0, iters=3, seed=9)
        b = als_fit(m, d=3, reg=0.1, alpha=5.0, iters=3, seed=9)
        assert np.array_equal(a.U, b.U) and np.array_equal(a.V, b.V)

    def test_duplicated_column_is_nearest_neighbor(self):
        rng = random.Random(11)
        base = random_matrix(rng, n_users=20, n_items=29, density=0.2)
        # clone item 3 into a new item index 29
        entries = list(base.entries) + [
            (u, 29, c) for u, i, c in base.entries if i == 3
        ]
        m = InteractionMatrix(20, 30, entries)
        model = als_fit(m, d=8, reg=0.1, alpha=40.0, iters=10, seed=0)
        neighbors = [j for j, _ in topk_similar_items(model, 3, 5)]
        assert 29 in neighbors

    def test_bad_hyperparameters(self):
        m = random_matrix(random.Random(2))
        with pytest.raises(SimilarityError):
            als_fit(m, d=0)
        with pytest.raises(SimilarityError):
            als_fit(m, iters=0)


class TestTopkSimilar:
    def test_identical_vectors(self):
        model = FactorModel(
            U=np.zeros((1, 2)),
            V=np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
            reg=0.0,
            alpha=1.0,
        )
        assert topk_similar_items(model, 0, 1) == [(1, pytest.approx(1.0))]

    def test_k_larger_than_items(self):
        model = FactorModel(U=np.zeros((1, 2)), V=np.eye(3, 2), reg=0.0, alpha=1.0)
        assert len(topk_similar_items(model, 0, 100)) == 2

    def test_matches_brute_force(self):
        rng = np.random.default_rng(4)
        V = rng.standard_normal((10, 5))
        model = FactorModel(U=np.zeros((1, 5)), V=V, reg=0.0, alpha=1.0)
        got = topk_similar_items(model, 2, 3)
        unit = V / np.linalg.norm(V, axis=1, keepdims=True)
        cosines = unit @ unit[2]
        expected = sorted(
            ((j, float(cosines[j])) for j in range(10) if j != 2),
            key=lambda js: (-js[1], js[0]),
        )[:3]
        assert [j for j, _ in got] == [j for j, _ in expected]
        for (_, a), (_, b) in zip(got, expected):
            assert a == pytest.approx(b, abs=1e-12)

    def test_scores_sorted_and_bounded(self):
        rng = np.random.default_rng(8)
        model = FactorModel(
            U=np.zeros((1, 4)), V=rng.standard_normal((12, 4)), reg=0.0, alpha=1.0
        )
        scores = [s for _, s in topk_similar_items(model, 0, 11)]
        assert all(-1 - 1e-9 <= s <= 1 + 1e-9 for s in scores)
        assert scores == sorted(scores, reverse=True)

    def test_cosine_symmetry(self):
        rng = np.random.default_rng(15)
        model = FactorModel(
            U=np.zeros((1, 4)), V=rng.standard_normal((6, 4)), reg=0.0, alpha=1.0
        )
        for i in range(6):
            for j, s in topk_similar_items(model, i, 5):
                back = dict(topk_similar_items(model, j, 5)).get(i)
                if back is not None:
                    assert abs(s - back) < 1e-12

    def test_zero_norm_vector(self):
        model = FactorModel(U=np.zeros((1, 2)), V=np.zeros((3, 2)), reg=0.0, alpha=1.0)
        with pytest.raises(SimilarityError) as err:
            topk_similar_items(model, 1, 2)
        assert "1" in str(err.value)


class TestIo:
    def test_load_and_write(self, tmp_path):
        inter = tmp_path / "inter.jsonl"
        inter.write_text(
            "\n".join(
                json.dumps(x)
                for x in [
                    {"user": "u1", "item": "a", "count": 2},
                    {"user": "u1", "item": "b", "count": 1},
                    {"user": "u2", "item": "a", "count": 3},
                    {"user": "u2", "item": "c", "count": 1},
                ]
            )
        )
        m, _users, items = load_interactions(str(inter))
        assert m.n_users == 2 and m.n_items == 3
        model = als_fit(m, d=2, reg=0.1, alpha=10.0, iters=4, seed=1)
        out = tmp_path / "neighbors.jsonl"
        n = write_neighbors(model, items, 2, str(out))
        assert n == 3
        lines = [json.loads(line) for line in out.read_text().splitlines()]
        assert {rec["track_id"] for rec in lines} == {"a", "b", "c"}
        assert all(len(rec["neighbors"]) == 2 for rec in lines)
