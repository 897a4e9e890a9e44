import logging

import pytest

from src.core.config import Settings, get_settings
from src.core.exceptions import CapExceededError, MissingConflictsError, ValidationError
from src.core.mrng.engine import ALL_CHECKS, MrngEngine
from src.core.mrng.geometry import generate_uniform_queries
from src.core.mrng.verify import brute_force_knn
from src.domain_models.dataset import Dataset
from src.domain_models.experiment import BuildParams
from src.domain_models.graph import ProximityGraph


def capped(exact: int, conflicts: int) -> Settings:
    base = get_settings()
    build = base.build.model_copy(update={"exact_build_cap": exact, "conflict_cap": conflicts})
    return base.model_copy(update={"build": build})


class TestCaps:
    def test_exact_cap(self, small_dataset: Dataset) -> None:
        engine = MrngEngine(settings=capped(50, 50))
        with pytest.raises(CapExceededError, match="exact build cap of 50"):
            engine.build(small_dataset, BuildParams())

    def test_conflict_cap(self, small_dataset: Dataset) -> None:
        engine = MrngEngine(settings=capped(500, 50))
        graph, _, conflicts = engine.build(small_dataset, BuildParams())
        assert conflicts is None
        assert graph.n == 120
        with pytest.raises(CapExceededError, match="conflict map cap"):
            engine.build(small_dataset, BuildParams(record_conflicts=True))

    def test_force_overrides(self, small_dataset: Dataset) -> None:
        engine = MrngEngine(settings=capped(50, 50))
        _, report, conflicts = engine.build(
            small_dataset, BuildParams(record_conflicts=True), force=True
        )
        assert conflicts is not None
        assert report.conflict_entries == conflicts.total_entries()


class TestBuild:
    def test_matches_builder(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        graph, report, _ = MrngEngine(threads=2).build(small_dataset, BuildParams(seed=11))
        assert graph == small_graph
        assert report.threads == 2
        assert report.degrees == MrngEngine().degree_stats(graph)

    def test_threads_default_from_settings(self) -> None:
        assert MrngEngine().threads == 1


class TestSearch:
    def test_defaults(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        q = generate_uniform_queries(1, 3, seed=0)[0]
        res = MrngEngine().search(small_graph, small_dataset, q)
        assert len(res.candidates) == 1
        assert res.ids[0] == brute_force_knn(small_dataset, q, 1)[0][0]

    def test_escape_needs_conflicts(self, small_dataset: Dataset, small_graph: ProximityGraph) -> None:
        with pytest.raises(MissingConflictsError, match="--conflicts"):
            MrngEngine().search(small_graph, small_dataset, (0.5, 0.5, 0.5), escape=True)

    def test_escape(self, conflict_triple: Dataset) -> None:
        engine = MrngEngine()
        graph, _, conflicts = engine.build(conflict_triple, BuildParams(record_conflicts=True))
        assert conflicts is not None
        res = engine.search(
            graph, conflict_triple, (0.5, 1.8), entry=0, conflicts=conflicts, escape=True, k=2
        )
        assert res.ids == [2, 0]


class TestVerify:
    def test_all_pass_in_fixed_order(
        self, small_dataset: Dataset, small_graph: ProximityGraph, caplog: pytest.LogCaptureFixture
    ) -> None:
        with caplog.at_level(logging.INFO):
            reports = MrngEngine().verify(
                small_graph, small_dataset, checks=list(reversed(ALL_CHECKS)), minimality_sample=20
            )
        assert [r.check for r in reports] == list(ALL_CHECKS)
        assert all(r.passed for r in reports)
        assert "Check definition: passed" in caplog.text

    def test_subset(self, collinear: Dataset) -> None:
        graph, _, _ = MrngEngine().build(collinear, BuildParams())
        reports = MrngEngine().verify(graph.without_edge(1, 2), collinear, checks=["monotonic"])
        assert len(reports) == 1
        assert not reports[0].passed

    def test_unknown_check(self, collinear: Dataset) -> None:
        graph, _, _ = MrngEngine().build(collinear, BuildParams())
        with pytest.raises(ValidationError, match="Unknown checks"):
            MrngEngine().verify(graph, collinear, checks=["bogus"])
