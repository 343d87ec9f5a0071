from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transferopt import ahp
from transferopt.ahp import (
    CLIP_HI,
    CLIP_LO,
    AffinityMatrix,
    DistanceConfig,
    TournamentMatrix,
    assemble_affinity,
    build_tournament,
    clip_smooth,
    load_affinity,
    normalize_store,
    principal_eigenvector,
    ratio_matrix,
    save_affinity,
    to_distance,
)
from transferopt.domain import TransferEdge
from transferopt.errors import SchemaError

from conftest import make_dictionary, store_from_scores


def dense_principal(matrix: np.ndarray) -> np.ndarray:
    """Independent oracle: dense eigendecomposition, largest real eigenvalue."""
    values, vectors = np.linalg.eig(matrix)
    k = int(np.argmax(values.real))
    v = vectors[:, k].real
    return v / v.sum()


def random_reciprocal(n: int, rng: np.random.Generator) -> np.ndarray:
    w = np.clip(rng.uniform(0, 1, size=(n, n)), CLIP_LO, CLIP_HI)
    wp = w / w.T
    np.fill_diagonal(wp, 1.0)
    return wp


class TestTournament:
    def test_direct_count(self):
        d = make_dictionary(3)
        a = TransferEdge(("task01",), "task00")
        b = TransferEdge(("task02",), "task00")
        store = store_from_scores(d, {a: [3, 5, 7], b: [4, 4, 6]})
        t = build_tournament(store, "task00")
        i, j = t.competitors.index(a), t.competitors.index(b)
        assert t.wins[i, j] == pytest.approx(2 / 3)
        assert t.wins[j, i] == pytest.approx(1 / 3)
        assert t.wins[i, i] == 0.5

    def test_all_ties(self):
        d = make_dictionary(3)
        a = TransferEdge(("task01",), "task00")
        b = TransferEdge(("task02",), "task00")
        store = store_from_scores(d, {a: [1.0, 2.0], b: [1.0, 2.0]})
        t = build_tournament(store, "task00")
        i, j = t.competitors.index(a), t.competitors.index(b)
        assert t.wins[i, j] == 0.0
        assert t.wins[j, i] == 0.0
        # ties clip to the floor on both sides, giving ratio 1 (indifference)
        r = ratio_matrix(clip_smooth(t))
        assert r.values[i, j] == 1.0

    def test_planted_order_recount(self):
        # three competitors with a planted strict order on 1000 images,
        # verified against a naive per-image recount
        rng = np.random.default_rng(11)
        d = make_dictionary(4)
        edges = [TransferEdge((f"task{k:02d}",), "task00") for k in (1, 2, 3)]
        base = {edges[0]: 3.0, edges[1]: 2.0, edges[2]: 1.0}
        scores = {e: list(base[e] + 0.9 * rng.standard_normal(1000)) for e in edges}
        store = store_from_scores(d, scores)
        t = build_tournament(store, "task00")
        for i, ei in enumerate(t.competitors):
            for j, ej in enumerate(t.competitors):
                if i == j:
                    continue
                manual = sum(
                    1 for a, b in zip(scores[ei], scores[ej]) if a > b
                ) / 1000
                assert t.wins[i, j] == pytest.approx(manual, abs=0)
        # planted order: higher base mean wins the majority
        order = sorted(range(3), key=lambda i: -t.wins[i].sum())
        assert [t.competitors[i] for i in order] == edges

    def test_empty_competitors_rejected(self):
        d = make_dictionary(3)
        a = TransferEdge(("task01",), "task00")
        store = store_from_scores(d, {a: [1.0]})
        with pytest.raises(SchemaError):
            build_tournament(store, "task00", [])

    def test_missing_competitor_rejected(self):
        d = make_dictionary(3)
        a = TransferEdge(("task01",), "task00")
        never_evaluated = TransferEdge(("task02",), "task00")
        store = store_from_scores(d, {a: [1.0, 2.0]})
        with pytest.raises(Exception, match="task02"):
            build_tournament(store, "task00", [a, never_evaluated])

    @given(
        scores_a=st.lists(st.integers(-50, 50), min_size=2, max_size=40),
        shift=st.floats(0.1, 10),
    )
    @settings(max_examples=60, deadline=None)
    def test_scale_invariance(self, scores_a, shift):
        # any strictly increasing transform of all scores leaves W unchanged
        n = len(scores_a)
        d = make_dictionary(3)
        a = TransferEdge(("task01",), "task00")
        b = TransferEdge(("task02",), "task00")
        scores_b = [float(v) for v in range(n)]
        raw = store_from_scores(d, {a: [float(v) for v in scores_a], b: scores_b})
        monotone = store_from_scores(
            d,
            {
                a: [math.atan(v) * shift + 3.0 for v in scores_a],
                b: [math.atan(v) * shift + 3.0 for v in scores_b],
            },
        )
        w1 = build_tournament(raw, "task00").wins
        w2 = build_tournament(monotone, "task00").wins
        assert np.array_equal(w1, w2)

    def test_linear_rescale_baseline_is_scale_sensitive(self):
        # the dismissed [0,1] linear rescale reacts to monotone warping of
        # scores; the tournament does not (this is the point of going ordinal)
        def linear_rescale(values):
            lo, hi = min(values), max(values)
            return [(v - lo) / (hi - lo) for v in values]

        raw = [1.0, 2.0, 10.0]
        warped = [math.exp(v) for v in raw]
        assert linear_rescale(raw) != pytest.approx(linear_rescale(warped))


class TestClipAndRatio:
    def test_clip_bounds(self):
        d = make_dictionary(3)
        a = TransferEdge(("task01",), "task00")
        b = TransferEdge(("task02",), "task00")
        store = store_from_scores(d, {a: [2.0, 3.0], b: [1.0, 2.5]})
        t = build_tournament(store, "task00")  # a wins every image
        i, j = t.competitors.index(a), t.competitors.index(b)
        assert t.wins[i, j] == 1.0 and t.wins[j, i] == 0.0
        clipped = clip_smooth(t)
        assert clipped.wins[i, j] == 0.999
        assert clipped.wins[j, i] == 0.001

    def test_clip_leaves_interior_alone(self):
        w = np.array([[0.5, 0.5], [0.5, 0.5]])
        t = TournamentMatrix(
            target="t",
            competitors=(TransferEdge(("a",), "t"), TransferEdge(("b",), "t")),
            wins=w,
        )
        assert np.array_equal(clip_smooth(t).wins, w)

    def test_ratio_values(self):
        edges = (TransferEdge(("a",), "t"), TransferEdge(("b",), "t"))
        t = TournamentMatrix(
            target="t", competitors=edges, wins=np.array([[0.5, 0.8], [0.2, 0.5]])
        )
        r = ratio_matrix(t)
        assert r.values[0, 1] == pytest.approx(4.0)
        assert r.values[1, 0] == pytest.approx(0.25)
        assert r.values[0, 0] == 1.0

    def test_ratio_extreme_bound(self):
        edges = (TransferEdge(("a",), "t"), TransferEdge(("b",), "t"))
        t = TournamentMatrix(
            target="t",
            competitors=edges,
            wins=np.array([[0.5, 0.999], [0.001, 0.5]]),
        )
        r = ratio_matrix(t)
        assert r.values[0, 1] == pytest.approx(999.0)
        assert np.max(np.abs(r.values * r.values.T - 1.0)) <= 1e-9

    def test_unclipped_input_rejected(self):
        edges = (TransferEdge(("a",), "t"), TransferEdge(("b",), "t"))
        t = TournamentMatrix(
            target="t", competitors=edges, wins=np.array([[0.5, 1.0], [0.0, 0.5]])
        )
        with pytest.raises(SchemaError):
            ratio_matrix(t)

    @given(st.integers(2, 8), st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_reciprocity_property(self, n, seed):
        rng = np.random.default_rng(seed)
        wins = np.clip(rng.uniform(0, 1, size=(n, n)), CLIP_LO, CLIP_HI)
        np.fill_diagonal(wins, 0.5)
        edges = tuple(TransferEdge((f"s{i}",), "t") for i in range(n))
        r = ratio_matrix(TournamentMatrix(target="t", competitors=edges, wins=wins))
        assert np.max(np.abs(r.values * r.values.T - 1.0)) <= 1e-9


class TestPrincipalEigenvector:
    def test_closed_form_2x2(self):
        # [[1, 4], [1/4, 1]] has eigenvalue 2 with eigenvector (0.8, 0.2)
        w = np.array([[1.0, 4.0], [0.25, 1.0]])
        v = principal_eigenvector(w)
        assert np.allclose(v, [0.8, 0.2], atol=1e-9)
        assert np.allclose(w @ v, 2.0 * v, atol=1e-9)

    def test_consistent_matrix_recovery(self):
        v = np.array([0.5, 0.3, 0.2])
        w = v[:, None] / v[None, :]
        est = principal_eigenvector(w)
        assert np.max(np.abs(est - v)) <= 1e-9

    def test_matches_dense_oracle(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 9))
            wp = random_reciprocal(n, rng)
            est = principal_eigenvector(wp)
            ref = dense_principal(wp)
            assert np.max(np.abs(est - ref)) <= 1e-8

    def test_positivity_and_normalization(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 12))
            v = principal_eigenvector(random_reciprocal(n, rng))
            assert np.all(v > 0)
            assert abs(v.sum() - 1.0) <= 1e-9

    def test_permutation_equivariance(self, rng):
        wp = random_reciprocal(6, rng)
        v = principal_eigenvector(wp)
        perm = rng.permutation(6)
        v_perm = principal_eigenvector(wp[np.ix_(perm, perm)])
        assert np.allclose(v_perm, v[perm], atol=1e-10)

    def test_single_competitor(self):
        assert np.array_equal(principal_eigenvector(np.array([[1.0]])), [1.0])

    def test_nonpositive_rejected(self):
        with pytest.raises(SchemaError):
            principal_eigenvector(np.array([[1.0, 0.0], [1.0, 1.0]]))


class TestAffinityMatrix:
    def test_assembly_sums_to_one(self):
        d = make_dictionary(4)
        per_target = {}
        for t in ("task00", "task01"):
            edges = tuple(
                TransferEdge((s,), t) for s in ("task02", "task03")
            ) + (TransferEdge((t,), t),)
            per_target[t] = (edges, np.array([0.2, 0.3, 0.5]))
        affinity = assemble_affinity(per_target)
        for t in ("task00", "task01"):
            assert sum(p for _, p in affinity.entries[t]) == pytest.approx(1.0, abs=1e-9)
        assert len(affinity.targets()) == 2

    def test_single_edge_degenerate(self):
        edge = TransferEdge(("s",), "t")
        affinity = assemble_affinity({"t": ((edge,), np.array([1.0]))})
        assert affinity.p(edge) == 1.0

    def test_mismatched_vector_rejected(self):
        edge = TransferEdge(("s",), "t")
        with pytest.raises(SchemaError):
            assemble_affinity({"t": ((edge,), np.array([0.5, 0.5]))})

    def test_sum_validation(self):
        edge = TransferEdge(("s",), "t")
        with pytest.raises(SchemaError, match="sum"):
            AffinityMatrix(entries={"t": ((edge, 0.5),)})

    def test_round_trip(self, tmp_path):
        d = make_dictionary(4)
        a = TransferEdge(("task01",), "task00")
        b = TransferEdge(("task02", "task03"), "task00")
        affinity = assemble_affinity({"task00": ((a, b), np.array([0.75, 0.25]))})
        path = tmp_path / "affinity.json"
        save_affinity(affinity, path)
        again = load_affinity(path)
        assert again.entries == affinity.entries

    def test_first_order_table(self):
        a = TransferEdge(("s1",), "t1")
        b = TransferEdge(("s2",), "t1")
        c = TransferEdge(("s1", "s2"), "t1")
        affinity = assemble_affinity({"t1": ((a, b, c), np.array([0.5, 0.3, 0.2]))})
        targets, sources, table = affinity.first_order_table()
        assert targets == ("t1",)
        assert sources == ("s1", "s2")
        assert table.tolist() == [[0.5, 0.3]]


class TestNormalizeStore:
    def test_full_pipeline(self):
        d = make_dictionary(3)
        store_scores = {}
        rng = np.random.default_rng(5)
        for t in d.targets:
            for s in d.sources:
                edge = TransferEdge((s,), t)
                store_scores[edge] = list(rng.standard_normal(50))
        store = store_from_scores(d, store_scores)
        affinity = normalize_store(store, d)
        assert set(affinity.targets()) == set(d.targets)
        for t in affinity.targets():
            total = sum(p for _, p in affinity.entries[t])
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_missing_target_rejected(self):
        d = make_dictionary(3)
        edge = TransferEdge(("task01",), "task00")
        store = store_from_scores(d, {edge: [1.0, 2.0]})
        with pytest.raises(SchemaError, match="task01"):
            normalize_store(store, d)


class TestDistance:
    def test_endpoints(self):
        cfg = DistanceConfig()
        assert cfg.beta == 20.0
        a = TransferEdge(("s1",), "t")
        b = TransferEdge(("s2",), "t")
        affinity = assemble_affinity({"t": ((a, b), np.array([1.0 - 1e-12, 1e-12]))})
        _, _, dist = to_distance(affinity)
        assert dist[0, 0] == pytest.approx(math.exp(-20.0), rel=1e-9)

    def test_zero_affinity_cell_maps_to_one(self):
        # a source with no first-order edge to some target gets p=0 -> dist=1
        a = TransferEdge(("s1",), "t1")
        b = TransferEdge(("s2",), "t1")
        c = TransferEdge(("s1",), "t2")
        affinity = assemble_affinity(
            {
                "t1": ((a, b), np.array([0.6, 0.4])),
                "t2": ((c,), np.array([1.0])),
            }
        )
        targets, sources, dist = to_distance(affinity)
        j = sources.index("s2")
        i = targets.index("t2")
        assert dist[i, j] == 1.0

    def test_monotone(self):
        a = TransferEdge(("s1",), "t")
        b = TransferEdge(("s2",), "t")
        affinity = assemble_affinity({"t": ((a, b), np.array([0.7, 0.3]))})
        _, sources, dist = to_distance(affinity)
        assert dist[0, sources.index("s1")] < dist[0, sources.index("s2")]

    def test_beta_must_be_positive(self):
        with pytest.raises(SchemaError):
            DistanceConfig(beta=0.0)
