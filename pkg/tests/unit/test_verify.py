import math
from unittest.mock import patch

import numpy as np
import pytest

from src.core.exceptions import ChecksumMismatchError, DegenerateGeometryError, ValidationError
from src.core.mrng.builder import build_mrng, compute_conflicts
from src.core.mrng.geometry import (
    angle_at,
    distance,
    distances_from,
    generate_uniform_dataset,
    generate_uniform_queries,
    in_lune,
)
from src.core.mrng.search import closer_and_go, pick_entry
from src.core.mrng.verify import (
    brute_force_knn,
    check_angle_separation,
    check_edge_minimality,
    check_filter_soundness,
    check_lemma4_sampling,
    check_mrng_definition,
    is_monotonic,
    nearest_ids,
    sample_lemma4_triples,
)
from src.domain_models.dataset import Dataset
from src.domain_models.graph import GraphMeta, ProximityGraph


def hand_graph(dataset: Dataset, lists: list[list[int]]) -> ProximityGraph:
    """Graph with the given out-lists, distances taken from the coordinates."""
    pts = dataset.points
    neighbors = []
    distances = []
    for v, ids in enumerate(lists):
        d = [distance(pts[v], pts[u]) for u in ids]
        order = sorted(range(len(ids)), key=lambda i: (d[i], ids[i]))
        neighbors.append([ids[i] for i in order])
        distances.append([d[i] for i in order])
    return ProximityGraph(
        n=dataset.n,
        neighbors=neighbors,
        distances=distances,
        meta=GraphMeta(dataset_checksum=dataset.checksum),
    )


class TestBruteForce:
    def test_collinear(self, collinear: Dataset) -> None:
        top = brute_force_knn(collinear, (0.9, 0.0), 2)
        assert [i for i, _ in top] == [1, 0]
        assert top[0][1] == pytest.approx(0.1)
        assert top[1][1] == pytest.approx(0.9)

    def test_full_ranking(self, collinear: Dataset) -> None:
        assert [i for i, _ in brute_force_knn(collinear, (5.0, 0.0), 3)] == [2, 1, 0]

    def test_tie_goes_to_lower_id(self, two_points: Dataset) -> None:
        assert brute_force_knn(two_points, (0.5, 0.0), 1)[0][0] == 0

    @pytest.mark.parametrize("k", [0, 4])
    def test_k_range(self, collinear: Dataset, k: int) -> None:
        with pytest.raises(ValidationError, match="k="):
            brute_force_knn(collinear, (0.0, 0.0), k)

    def test_batch_agrees(self, small_dataset: Dataset) -> None:
        queries = generate_uniform_queries(25, 3, seed=1)
        batch = nearest_ids(small_dataset, queries)
        assert batch.tolist() == [brute_force_knn(small_dataset, q, 1)[0][0] for q in queries]


class TestMonotonic:
    def test_exact_mrng(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        report = is_monotonic(small_graph, small_dataset)
        assert report.passed
        assert report.stats["pairs_checked"] == 120 * 119

    def test_missing_edge_breaks_path(self, collinear: Dataset) -> None:
        g = build_mrng(collinear).without_edge(1, 2)
        report = is_monotonic(g, collinear)
        assert not report.passed
        assert report.counterexample is not None
        assert (report.counterexample["p"], report.counterexample["q"]) == (0, 2)
        assert report.stats["failing_pairs"] == 2

    def test_complete_digraph(self, collinear: Dataset) -> None:
        g = hand_graph(collinear, [[1, 2], [0, 2], [0, 1]])
        assert is_monotonic(g, collinear).passed

    def test_wrong_dataset(self, collinear: Dataset, two_points: Dataset) -> None:
        with pytest.raises(ChecksumMismatchError, match="checksum"):
            is_monotonic(build_mrng(two_points), collinear)


class TestDefinition:
    def test_exact_mrng(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        assert check_mrng_definition(small_graph, small_dataset).passed

    def test_extra_edge_with_blocker(self, collinear: Dataset) -> None:
        g = build_mrng(collinear).with_edge(0, 2, 2.0)
        report = check_mrng_definition(g, collinear)
        assert not report.passed
        cx = report.counterexample
        assert cx is not None
        assert (cx["kind"], cx["x"], cx["y"], cx["z"]) == ("edge-with-blocker", 0, 2, 1)
        pts = collinear.points
        assert in_lune(pts[cx["x"]], pts[cx["y"]], pts[cx["z"]])

    def test_missing_edge(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        y = int(small_graph.neighbors[0][0])
        report = check_mrng_definition(small_graph.without_edge(0, y), small_dataset)
        assert not report.passed
        cx = report.counterexample
        assert cx is not None
        assert cx["kind"] == "missing-edge"
        assert cx["x"] == 0
        assert cx["y"] <= y

    def test_stored_distance(self, collinear: Dataset) -> None:
        g = build_mrng(collinear)
        bad = ProximityGraph(
            n=3,
            neighbors=g.neighbors,
            distances=[np.array([1.5]), g.distances[1], g.distances[2]],
            meta=g.meta,
        )
        report = check_mrng_definition(bad, collinear)
        assert report.counterexample == {
            "kind": "stored-distance",
            "x": 0,
            "y": 1,
            "stored": 1.5,
            "actual": 1.0,
        }

    @pytest.mark.parametrize(("rel", "passed"), [(5e-9, False), (1e-10, True)])
    def test_stored_distance_tolerance_is_relative(
        self, small_dataset: Dataset, small_graph: ProximityGraph, rel: float, passed: bool
    ) -> None:
        distances = [d.copy() for d in small_graph.distances]
        actual = float(distances[0][0])
        assert actual < 1.0
        distances[0][0] = actual * (1.0 + rel)
        nudged = ProximityGraph(
            n=small_graph.n, neighbors=small_graph.neighbors, distances=distances, meta=small_graph.meta
        )
        report = check_mrng_definition(nudged, small_dataset)
        assert report.passed is passed
        if not passed:
            assert report.counterexample is not None
            assert report.counterexample["kind"] == "stored-distance"


class TestMinimality:
    def test_exact_mrng(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        report = check_edge_minimality(small_graph, small_dataset)
        assert report.passed
        assert report.stats["edges_checked"] == small_graph.num_edges

    def test_sampled(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        report = check_edge_minimality(small_graph, small_dataset, sample=25, seed=3)
        assert report.passed
        assert report.stats["edges_checked"] == 25

    def test_redundant_long_edge(self, collinear: Dataset) -> None:
        g = build_mrng(collinear).with_edge(0, 2, 2.0)
        report = check_edge_minimality(g, collinear)
        assert not report.passed
        assert report.counterexample is not None
        assert (report.counterexample["x"], report.counterexample["y"]) == (0, 2)
        assert report.counterexample["still_monotonic"] is True

    def test_two_points(self, two_points: Dataset) -> None:
        assert check_edge_minimality(build_mrng(two_points), two_points).passed


class TestAngles:
    @pytest.mark.parametrize("d", [2, 10])
    def test_exact_mrng(self, d: int) -> None:
        ds = generate_uniform_dataset(150, d, seed=d)
        report = check_angle_separation(build_mrng(ds), ds)
        assert report.passed
        assert report.stats["min_angle"] >= math.pi / 3 - 1e-9

    def test_forty_five_degrees(self) -> None:
        ds = Dataset(points=np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]]))
        g = hand_graph(ds, [[1, 2], [0], [0]])
        report = check_angle_separation(g, ds)
        assert not report.passed
        cx = report.counterexample
        assert cx is not None
        assert (cx["v"], cx["u1"], cx["u2"]) == (0, 1, 2)
        assert cx["angle"] == pytest.approx(math.pi / 4)

    def test_single_edges_vacuous(self, two_points: Dataset) -> None:
        report = check_angle_separation(build_mrng(two_points), two_points)
        assert report.passed
        assert report.stats["pairs_checked"] == 0

    def test_counterexample_reverifies(self, collinear: Dataset) -> None:
        g = build_mrng(collinear).with_edge(0, 2, 2.0)
        cx = check_angle_separation(g, collinear).counterexample
        assert cx is not None
        pts = collinear.points
        assert angle_at(pts[cx["v"]], pts[cx["u1"]], pts[cx["u2"]]) < math.pi / 3


class TestThresholdSampling:
    def test_aligned(self) -> None:
        report = check_lemma4_sampling((0.0, 0.0), (1.0, 0.0), (1.9, 0.0))
        assert report.passed
        assert report.stats["sampled"] == 1
        assert report.stats["closed_form"] == 1
        assert report.stats["precondition"] == 0

    def test_opposite(self) -> None:
        report = check_lemma4_sampling((0.0, 0.0), (1.0, 0.0), (-0.7, 0.0))
        assert report.passed
        assert report.stats["sampled"] == 0
        assert report.stats["closed_form"] == 0

    def test_degenerate(self) -> None:
        with pytest.raises(DegenerateGeometryError):
            check_lemma4_sampling((1.0, 1.0), (1.0, 1.0), (2.0, 0.0))
        with pytest.raises(DegenerateGeometryError):
            check_lemma4_sampling((1.0, 1.0), (2.0, 0.0), (1.0, 1.0))

    @pytest.mark.parametrize("d", [3, 5])
    def test_samples_fill_the_whole_ball(self, d: int) -> None:
        v, q, u = sample_lemma4_triples(1, d, seed=5)[0]
        captured: list[np.ndarray] = []

        def spy(points: np.ndarray, x: np.ndarray) -> np.ndarray:
            if points.shape[0] > 1:
                captured.append(points.copy())
            return distances_from(points, x)

        with patch("src.core.mrng.verify.distances_from", side_effect=spy):
            report = check_lemma4_sampling(v, q, u, samples=256, boundary_samples=64)
        ws = captured[0]
        assert ws.shape == (320, d)
        assert report.stats["samples"] == 320
        r = distance(v, q)
        offsets = ws - q
        assert np.linalg.matrix_rank(offsets[:256]) == d
        assert np.all(np.linalg.norm(offsets, axis=1) <= r * (1.0 + 1e-12))
        # boundary component stays on the circle of the (v, q, u) plane
        ring = offsets[256:]
        np.testing.assert_allclose(np.linalg.norm(ring, axis=1), r, rtol=1e-12)
        assert np.linalg.matrix_rank(ring, tol=1e-9) == 2

    def test_dimension_mismatch(self) -> None:
        with pytest.raises(ValidationError, match="dimension"):
            check_lemma4_sampling((0.0, 0.0), (1.0, 0.0, 0.0), (2.0, 0.0))

    @pytest.mark.parametrize("d", [1, 2, 3, 5])
    def test_random_triples(self, d: int) -> None:
        triples = sample_lemma4_triples(150, d, seed=d)
        assert len(triples) == 150
        for v, q, u in triples:
            assert distance(u, q) >= distance(v, q) > 0.0
            report = check_lemma4_sampling(v, q, u, samples=64, boundary_samples=4096)
            assert report.passed, report.counterexample
            assert report.stats["precondition"] == 1


class TestFilterSoundness:
    def test_holds_at_local_minima(self) -> None:
        ds = generate_uniform_dataset(80, 3, seed=21)
        g = build_mrng(ds)
        cm = compute_conflicts(ds, g)
        entry = pick_entry(ds)
        for q in generate_uniform_queries(30, 3, seed=21):
            v = closer_and_go(g, ds, entry, q).ids[0]
            assert check_filter_soundness(ds, g, cm, v, q).passed

    def test_query_on_node(self, conflict_triple: Dataset) -> None:
        g = build_mrng(conflict_triple)
        cm = compute_conflicts(conflict_triple, g)
        report = check_filter_soundness(conflict_triple, g, cm, 0, (0.0, 0.0))
        assert report.passed
        assert report.stats["edges_filtered"] == 0
