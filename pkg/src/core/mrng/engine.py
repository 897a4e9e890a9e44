import logging
from collections.abc import Sequence
from typing import Any

import numpy as np
import numpy.typing as npt

from src.core.config import Settings, get_settings
from src.core.constants import (
    CHECK_ANGLES,
    CHECK_DEFINITION,
    CHECK_MINIMALITY,
    CHECK_MONOTONIC,
    ERR_CAP_EXCEEDED,
)
from src.core.exceptions import CapExceededError, MissingConflictsError, ValidationError
from src.core.mrng import analytics, builder, search, verify
from src.domain_models.dataset import Dataset
from src.domain_models.experiment import BuildParams, BuildReport
from src.domain_models.graph import ConflictMap, DegreeStats, ProximityGraph
from src.domain_models.search import SearchResult
from src.domain_models.verification import CheckReport

logger = logging.getLogger(__name__)

ALL_CHECKS = (CHECK_DEFINITION, CHECK_MONOTONIC, CHECK_ANGLES, CHECK_MINIMALITY)


class MrngEngine:
    """
    Facade over construction, search, analytics and verification.
    Applies the configured thread count and desk-scale caps.
    """

    def __init__(self, settings: Settings | None = None, threads: int | None = None) -> None:
        self.settings = settings or get_settings()
        self.threads = threads or self.settings.build.threads

    def check_cap(self, n: int, *, conflicts: bool = False, force: bool = False) -> None:
        """Refuse quadratic work above the configured size unless forced."""
        cfg = self.settings.build
        cap, what = (cfg.conflict_cap, "conflict map") if conflicts else (cfg.exact_build_cap, "exact build")
        if n > cap and not force:
            raise CapExceededError(ERR_CAP_EXCEEDED.format(n=n, what=what, cap=cap))

    def build(
        self,
        dataset: Dataset,
        params: BuildParams,
        pools: Sequence[npt.NDArray[np.int64]] | None = None,
        *,
        force: bool = False,
    ) -> tuple[ProximityGraph, BuildReport, ConflictMap | None]:
        """Build a graph (and its conflict map when params ask for one)."""
        self.check_cap(dataset.n, force=force)
        if params.record_conflicts:
            self.check_cap(dataset.n, conflicts=True, force=force)
        graph, report = builder.build_with_report(dataset, params, pools, threads=self.threads)
        conflicts = None
        if params.record_conflicts:
            conflicts = builder.compute_conflicts(dataset, graph, self.threads)
            report = report.model_copy(update={"conflict_entries": conflicts.total_entries()})
        return graph, report, conflicts

    def degree_stats(self, graph: ProximityGraph) -> DegreeStats:
        return analytics.degree_stats(graph)

    def search(
        self,
        graph: ProximityGraph,
        dataset: Dataset,
        q: Any,
        *,
        budget: int | None = None,
        k: int | None = None,
        entry: int | None = None,
        conflicts: ConflictMap | None = None,
        escape: bool = False,
        phase1_budget: int | None = None,
        trace: bool = False,
    ) -> SearchResult:
        """Best-first search, or escape-enabled search when `escape` is set."""
        graph.require_dataset(dataset.checksum)
        budget = budget or self.settings.search.budget
        k = k or self.settings.search.k
        start = search.pick_entry(dataset) if entry is None else entry
        if escape:
            if conflicts is None:
                msg = "Escape search needs a conflict map (build with --conflicts)."
                raise MissingConflictsError(msg)
            return search.search_with_escape(
                graph, dataset, conflicts, start, q, budget, k, phase1_budget=phase1_budget, trace=trace
            )
        return search.best_first(graph, dataset, start, q, budget, k, trace=trace)

    def verify(
        self,
        graph: ProximityGraph,
        dataset: Dataset,
        checks: Sequence[str] = ALL_CHECKS,
        minimality_sample: int | None = None,
        seed: int = 0,
    ) -> list[CheckReport]:
        """Run the selected structural checks in a fixed order."""
        unknown = set(checks) - set(ALL_CHECKS)
        if unknown:
            msg = f"Unknown checks: {sorted(unknown)}; choose from {list(ALL_CHECKS)}."
            raise ValidationError(msg)
        reports: list[CheckReport] = []
        for name in ALL_CHECKS:
            if name not in checks:
                continue
            if name == CHECK_DEFINITION:
                reports.append(verify.check_mrng_definition(graph, dataset))
            elif name == CHECK_MONOTONIC:
                reports.append(verify.is_monotonic(graph, dataset))
            elif name == CHECK_ANGLES:
                reports.append(
                    verify.check_angle_separation(graph, dataset, self.settings.geometry.angle_tolerance)
                )
            else:
                reports.append(verify.check_edge_minimality(graph, dataset, minimality_sample, seed))
            logger.info("Check %s: %s", name, "passed" if reports[-1].passed else "FAILED")
        return reports
