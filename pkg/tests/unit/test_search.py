import numpy as np
import pytest

from src.core.exceptions import (
    DimensionMismatchError,
    MissingConflictsError,
    NotLocalMinimumError,
    ValidationError,
)
from src.core.mrng.builder import build_mrng, compute_conflicts
from src.core.mrng.geometry import generate_uniform_dataset, generate_uniform_queries
from src.core.mrng.search import (
    best_first,
    best_first_checkpoints,
    closer_and_go,
    conflict_search,
    filtered_edges,
    pick_entry,
    search_with_escape,
)
from src.core.mrng.verify import brute_force_knn
from src.domain_models.dataset import Dataset
from src.domain_models.enums import TraceAction
from src.domain_models.graph import ProximityGraph

Q_TRIPLE = (0.5, 1.8)


@pytest.fixture
def dead_end(conflict_triple: Dataset) -> ProximityGraph:
    """Exact graph of the triple with u->w removed: w is unreachable from v by greedy moves."""
    return build_mrng(conflict_triple).without_edge(1, 2)


class TestCloserAndGo:
    def test_walks_collinear(self, collinear: Dataset) -> None:
        g = build_mrng(collinear)
        res = closer_and_go(g, collinear, 0, (2.1, 0.0))
        assert res.path == [0, 1, 2]
        assert res.ids == [2]
        assert res.terminated_at_local_min
        assert res.distance_evals == 3

    def test_start_at_nearest(self, collinear: Dataset) -> None:
        g = build_mrng(collinear)
        res = closer_and_go(g, collinear, 1, (1.0, 0.1))
        assert res.path == [1]

    def test_stuck_in_local_min(self, conflict_triple: Dataset) -> None:
        res = closer_and_go(build_mrng(conflict_triple), conflict_triple, 0, Q_TRIPLE)
        assert res.ids == [0]

    def test_reaches_dataset_points(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        for target in (0, 17, 99):
            res = closer_and_go(small_graph, small_dataset, 5, small_dataset.points[target])
            assert res.ids == [target]

    def test_trace(self, collinear: Dataset) -> None:
        res = closer_and_go(build_mrng(collinear), collinear, 0, (2.1, 0.0), trace=True)
        actions = [e.action for e in res.trace]
        assert actions[0] == TraceAction.VISIT
        assert TraceAction.EXPAND in actions
        assert [e.step for e in res.trace] == list(range(len(res.trace)))

    def test_bad_input(self, collinear: Dataset) -> None:
        g = build_mrng(collinear)
        with pytest.raises(DimensionMismatchError):
            closer_and_go(g, collinear, 0, (1.0, 0.0, 0.0))
        with pytest.raises(ValidationError, match="out of range"):
            closer_and_go(g, collinear, 3, (1.0, 0.0))


class TestBestFirst:
    @pytest.mark.parametrize("budget", [1, 2, 7, 30])
    def test_budget_never_exceeded(
        self, small_dataset: Dataset, small_graph: ProximityGraph, budget: int
    ) -> None:
        for q in generate_uniform_queries(10, 3, seed=2):
            res = best_first(small_graph, small_dataset, 0, q, budget)
            assert 1 <= res.distance_evals <= budget

    @pytest.mark.parametrize("budget", [1, 5, 37, 120])
    def test_budget_spent_exactly_when_graph_is_large_enough(
        self, small_dataset: Dataset, small_graph: ProximityGraph, budget: int
    ) -> None:
        # the exact graph is monotonic, so every node is reachable from the entry
        for q in generate_uniform_queries(10, 3, seed=4):
            res = best_first(small_graph, small_dataset, pick_entry(small_dataset), q, budget)
            assert res.distance_evals == budget

    def test_exhaustive_budget_finds_nearest(
        self, small_dataset: Dataset, small_graph: ProximityGraph
    ) -> None:
        for q in generate_uniform_queries(10, 3, seed=3):
            res = best_first(small_graph, small_dataset, 0, q, small_dataset.n, k=3)
            truth = brute_force_knn(small_dataset, q, 3)
            assert res.ids[0] == truth[0][0]
            assert len(res.candidates) == 3

    def test_k_larger_than_evaluated(self, collinear: Dataset) -> None:
        res = best_first(build_mrng(collinear), collinear, 0, (0.0, 0.0), 1, k=3)
        assert res.ids == [0]

    def test_rejects_non_positive(self, collinear: Dataset) -> None:
        g = build_mrng(collinear)
        with pytest.raises(ValidationError, match="budget"):
            best_first(g, collinear, 0, (0.0, 0.0), 0)
        with pytest.raises(ValidationError, match="k must"):
            best_first(g, collinear, 0, (0.0, 0.0), 5, k=0)

    def test_checkpoints_match_independent_runs(
        self, small_dataset: Dataset, small_graph: ProximityGraph
    ) -> None:
        budgets = [1, 3, 10, 40, 500]
        for q in generate_uniform_queries(8, 3, seed=4):
            marks = best_first_checkpoints(small_graph, small_dataset, 7, q, budgets)
            for b in budgets:
                res = best_first(small_graph, small_dataset, 7, q, b)
                assert marks[b] == (res.ids[0], res.distance_evals)

    def test_checkpoints_empty(self, collinear: Dataset) -> None:
        assert best_first_checkpoints(build_mrng(collinear), collinear, 0, (0.0, 0.0), []) == {}


class TestConflictSearch:
    def test_finds_conflicting_node(self, conflict_triple: Dataset) -> None:
        g = build_mrng(conflict_triple)
        cm = compute_conflicts(conflict_triple, g)
        assert conflict_search(conflict_triple, g, cm, 0, Q_TRIPLE) == 2

    def test_query_on_node_returns_it(self, conflict_triple: Dataset) -> None:
        g = build_mrng(conflict_triple)
        cm = compute_conflicts(conflict_triple, g)
        assert conflict_search(conflict_triple, g, cm, 0, (0.0, 0.0)) == 0

    def test_not_local_minimum(self, conflict_triple: Dataset) -> None:
        g = build_mrng(conflict_triple)
        cm = compute_conflicts(conflict_triple, g)
        with pytest.raises(NotLocalMinimumError, match="neighbor 2"):
            conflict_search(conflict_triple, g, cm, 1, Q_TRIPLE)

    def test_missing_conflicts(self, conflict_triple: Dataset) -> None:
        g = build_mrng(conflict_triple)
        with pytest.raises(MissingConflictsError):
            conflict_search(conflict_triple, g, None, 0, Q_TRIPLE)

    @pytest.mark.parametrize("d", [2, 5])
    def test_matches_brute_force(self, d: int) -> None:
        ds = generate_uniform_dataset(80, d, seed=d)
        g = build_mrng(ds)
        cm = compute_conflicts(ds, g)
        entry = pick_entry(ds)
        for q in generate_uniform_queries(40, d, seed=d):
            v = closer_and_go(g, ds, entry, q).ids[0]
            assert conflict_search(ds, g, cm, v, q) == brute_force_knn(ds, q, 1)[0][0]

    def test_filter_keeps_the_blocked_edge(self, conflict_triple: Dataset) -> None:
        g = build_mrng(conflict_triple)
        q = np.asarray(Q_TRIPLE)
        r = float(np.linalg.norm(q))
        assert filtered_edges(g, conflict_triple, 0, q, r).tolist() == [0]


class TestSearchWithEscape:
    def test_escapes_dead_end(self, conflict_triple: Dataset, dead_end: ProximityGraph) -> None:
        cm = compute_conflicts(conflict_triple, dead_end)
        plain = best_first(dead_end, conflict_triple, 0, Q_TRIPLE, 10)
        assert plain.ids[0] == 0
        res = search_with_escape(dead_end, conflict_triple, cm, 0, Q_TRIPLE, 10, trace=True)
        assert res.ids[0] == 2
        assert res.escapes >= 1
        assert res.terminated_at_local_min
        assert any(e.action == TraceAction.ESCAPE for e in res.trace)

    def test_escape_respects_budget(self, conflict_triple: Dataset, dead_end: ProximityGraph) -> None:
        cm = compute_conflicts(conflict_triple, dead_end)
        res = search_with_escape(dead_end, conflict_triple, cm, 0, Q_TRIPLE, 2)
        assert res.distance_evals <= 2
        assert res.ids[0] == 0

    def test_unlimited_never_worse_than_best_first(
        self, small_dataset: Dataset, small_graph: ProximityGraph
    ) -> None:
        cm = compute_conflicts(small_dataset, small_graph)
        for q in generate_uniform_queries(15, 3, seed=6):
            plain = best_first(small_graph, small_dataset, 0, q, small_dataset.n)
            escaped = search_with_escape(small_graph, small_dataset, cm, 0, q, None)
            assert escaped.candidates[0].distance <= plain.candidates[0].distance
            assert escaped.ids[0] == brute_force_knn(small_dataset, q, 1)[0][0]

    def test_phase1_budget_stops_early(
        self, small_dataset: Dataset, small_graph: ProximityGraph
    ) -> None:
        cm = compute_conflicts(small_dataset, small_graph)
        q = generate_uniform_queries(1, 3, seed=8)[0]
        res = search_with_escape(small_graph, small_dataset, cm, 0, q, 60, phase1_budget=5)
        assert res.distance_evals <= 60

    def test_requires_matching_conflicts(self, conflict_triple: Dataset, dead_end: ProximityGraph) -> None:
        full = compute_conflicts(conflict_triple, build_mrng(conflict_triple))
        with pytest.raises(MissingConflictsError):
            search_with_escape(dead_end, conflict_triple, None, 0, Q_TRIPLE, 10)
        with pytest.raises(ValidationError, match="does not match"):
            search_with_escape(dead_end, conflict_triple, full, 0, Q_TRIPLE, 10)


class TestPickEntry:
    def test_centroid_nearest(self, collinear: Dataset) -> None:
        assert pick_entry(collinear) == 1

    def test_tie_goes_to_lower_id(self, two_points: Dataset) -> None:
        assert pick_entry(two_points) == 0
