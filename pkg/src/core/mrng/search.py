"""
Query-time search over a proximity graph.

Budget accounting: one unit is one distance(q, node) evaluation for a node not evaluated
before in the same query. Edge distances are stored in the graph and cost nothing. An
evaluation that would exceed the budget is never performed.
"""

import heapq
import logging
from typing import Any

import numpy as np
import numpy.typing as npt

from src.core.constants import (
    ERR_DIMENSION_MISMATCH,
    ERR_MISSING_CONFLICTS,
    ERR_NODE_RANGE,
    ERR_NOT_LOCAL_MIN,
    ERR_POSITIVE,
)
from src.core.exceptions import (
    CalculationError,
    DimensionMismatchError,
    MissingConflictsError,
    NotLocalMinimumError,
    ValidationError,
)
from src.core.mrng.geometry import angles_at, distances_from, f_theta_array
from src.domain_models.dataset import Dataset, Point, as_point
from src.domain_models.enums import TraceAction
from src.domain_models.graph import ConflictMap, ProximityGraph
from src.domain_models.search import Candidate, SearchResult, TraceEvent

logger = logging.getLogger(__name__)


class _QueryEvaluator:
    """Per-query distance cache with budget accounting and an optional trace."""

    def __init__(self, dataset: Dataset, q: Point, budget: int | None, trace: bool) -> None:
        self.points = dataset.points
        self.q = q
        self.budget = budget
        self.cache: dict[int, float] = {}
        self.order: list[int] = []
        self.events: list[TraceEvent] | None = [] if trace else None

    @property
    def evals(self) -> int:
        return len(self.order)

    @property
    def exhausted(self) -> bool:
        return self.budget is not None and self.evals >= self.budget

    def known(self, node: int) -> bool:
        return node in self.cache

    def dist(self, node: int) -> float | None:
        """Distance to q, evaluating it if needed; None when the budget forbids it."""
        cached = self.cache.get(node)
        if cached is not None:
            return cached
        if self.exhausted:
            return None
        d = float(distances_from(self.points[node][None, :], self.q)[0])
        self.cache[node] = d
        self.order.append(node)
        self.record(node, d, TraceAction.VISIT)
        return d

    def require(self, node: int) -> float:
        d = self.dist(node)
        if d is None:
            msg = f"Budget exhausted before node {node} could be evaluated."
            raise CalculationError(msg)
        return d

    def record(self, node: int, d: float, action: TraceAction) -> None:
        if self.events is not None:
            self.events.append(TraceEvent(step=len(self.events), node=node, distance=d, action=action))

    def best(self) -> tuple[float, int]:
        return min((d, v) for v, d in self.cache.items())

    def result(self, k: int, path: list[int], local_min: bool, escapes: int = 0) -> SearchResult:
        ranked = sorted((d, v) for v, d in self.cache.items())[:k]
        return SearchResult(
            candidates=[Candidate(node=v, distance=d) for d, v in ranked],
            distance_evals=self.evals,
            path=path,
            terminated_at_local_min=local_min,
            escapes=escapes,
            trace=self.events or [],
        )


def query_point(dataset: Dataset, q: Any) -> Point:
    point = as_point(q)
    if point.size != dataset.dim:
        raise DimensionMismatchError(ERR_DIMENSION_MISMATCH.format(a=point.size, b=dataset.dim))
    return point


def _check_node(node: int, n: int) -> int:
    if not (0 <= int(node) < n):
        raise ValidationError(ERR_NODE_RANGE.format(node=node, n=n))
    return int(node)


def _check_positive(name: str, value: int | None) -> None:
    if value is not None and value < 1:
        raise ValidationError(ERR_POSITIVE.format(name=name, value=value))


def closer_and_go(
    graph: ProximityGraph, dataset: Dataset, p: int, q: Any, *, trace: bool = False
) -> SearchResult:
    """
    Greedy walk: move to the out-neighbor minimising (distance to q, id) while it is strictly
    closer than the current node; stop at a local minimum.
    """
    point = query_point(dataset, q)
    current = _check_node(p, graph.n)
    ev = _QueryEvaluator(dataset, point, None, trace)
    d_cur = ev.require(current)
    path = [current]
    while True:
        ev.record(current, d_cur, TraceAction.EXPAND)
        best: tuple[float, int] | None = None
        for u in graph.neighbors[current]:
            du = ev.require(int(u))
            if du < d_cur and (best is None or (du, int(u)) < best):
                best = (du, int(u))
        if best is None:
            break
        d_cur, current = best
        path.append(current)
    return SearchResult(
        candidates=[Candidate(node=current, distance=d_cur)],
        distance_evals=ev.evals,
        path=path,
        terminated_at_local_min=True,
        trace=ev.events or [],
    )


class _BestFirst:
    """Best-first expansion state shared by plain and escape-enabled search."""

    def __init__(self, graph: ProximityGraph, ev: _QueryEvaluator) -> None:
        self.graph = graph
        self.ev = ev
        self.heap: list[tuple[float, int]] = []
        self.expanded: set[int] = set()
        self.complete: set[int] = set()
        self.path: list[int] = []

    def push(self, node: int, d: float) -> None:
        if node not in self.expanded:
            heapq.heappush(self.heap, (d, node))

    def expand(self, node: int) -> bool:
        """Evaluate the unevaluated out-neighbors of node; False if the budget cut it short."""
        if node not in self.expanded:
            self.expanded.add(node)
            self.path.append(node)
            self.ev.record(node, self.ev.cache[node], TraceAction.EXPAND)
        for u in self.graph.neighbors[node].tolist():
            if self.ev.known(u):
                continue
            du = self.ev.dist(u)
            if du is None:
                return False
            self.push(u, du)
        self.complete.add(node)
        return True

    def run(self, stop_at: int | None = None) -> None:
        """Expand the closest unexpanded candidate until the pool empties or evaluations reach stop_at."""
        while self.heap and not self.ev.exhausted:
            if stop_at is not None and self.ev.evals >= stop_at:
                return
            _, node = heapq.heappop(self.heap)
            if node in self.expanded:
                continue
            if not self.expand(node):
                return

    def top_is_local_min(self) -> bool:
        d_top, top = self.ev.best()
        if top not in self.complete:
            return False
        return all(self.ev.cache[int(u)] >= d_top for u in self.graph.neighbors[top])


def best_first(
    graph: ProximityGraph,
    dataset: Dataset,
    entry: int,
    q: Any,
    budget: int,
    k: int = 1,
    *,
    trace: bool = False,
) -> SearchResult:
    """Budgeted best-first search from `entry`; returns the k closest evaluated nodes."""
    _check_positive("budget", budget)
    _check_positive("k", k)
    point = query_point(dataset, q)
    start = _check_node(entry, graph.n)
    ev = _QueryEvaluator(dataset, point, budget, trace)
    bf = _BestFirst(graph, ev)
    bf.push(start, ev.require(start))
    bf.run()
    return ev.result(k, bf.path, bf.top_is_local_min())


def best_first_checkpoints(
    graph: ProximityGraph, dataset: Dataset, entry: int, q: Any, budgets: list[int]
) -> dict[int, tuple[int, int]]:
    """
    Top-1 id and distance evaluations used, for each budget, from a single run.

    The evaluation sequence under budget B is a prefix of the sequence under any larger
    budget, so the top-1 at B is the best of the first B evaluations of the largest run.
    """
    if not budgets:
        return {}
    for b in budgets:
        _check_positive("budget", b)
    point = query_point(dataset, q)
    start = _check_node(entry, graph.n)
    ev = _QueryEvaluator(dataset, point, max(budgets), False)
    bf = _BestFirst(graph, ev)
    bf.push(start, ev.require(start))
    bf.run()

    keys = [(ev.cache[v], v) for v in ev.order]
    running: list[int] = []
    best = keys[0]
    for key in keys:
        best = min(best, key)
        running.append(best[1])
    used = {b: min(b, len(running)) for b in budgets}
    return {b: (running[used[b] - 1], used[b]) for b in budgets}


def _require_conflicts(graph: ProximityGraph, conflicts: ConflictMap | None, v: int) -> ConflictMap:
    if conflicts is None:
        raise MissingConflictsError(ERR_MISSING_CONFLICTS)
    graph.require_dataset(conflicts.dataset_checksum)
    if conflicts.n != graph.n or len(conflicts.ids[v]) != graph.degree(v):
        msg = f"Conflict map does not match the graph at node {v}."
        raise ValidationError(msg)
    return conflicts


def filtered_edges(
    graph: ProximityGraph, dataset: Dataset, v: int, q: Point, r: float
) -> npt.NDArray[np.int64]:
    """Positions of the out-edges v->u with delta(v,u) < r * f(angle qvu)."""
    ids, dists = graph.out(v)
    if ids.size == 0:
        return np.zeros(0, dtype=np.int64)
    points = dataset.points
    theta = angles_at(points[v], q, points[ids])
    return np.flatnonzero(dists < r * f_theta_array(theta)).astype(np.int64)


def _conflict_scan(
    graph: ProximityGraph,
    dataset: Dataset,
    conflicts: ConflictMap,
    v: int,
    ev: _QueryEvaluator,
) -> list[int]:
    """Evaluate every conflict candidate that survives both filters; returns nodes newly evaluated."""
    r = ev.cache[v]
    if r == 0.0:
        return []
    fresh: list[int] = []
    for pos in filtered_edges(graph, dataset, v, ev.q, r):
        w_ids, w_dists = conflicts.conflicts(v, int(pos))
        cut = int(np.searchsorted(w_dists, 2.0 * r, side="left"))
        for w in w_ids[:cut].tolist():
            if ev.known(w):
                continue
            if ev.dist(w) is None:
                return fresh
            fresh.append(w)
    return fresh


def _local_min_or_raise(graph: ProximityGraph, v: int, ev: _QueryEvaluator) -> None:
    d_v = ev.cache[v]
    better: tuple[float, int] | None = None
    for u in graph.neighbors[v]:
        du = ev.require(int(u))
        if du < d_v and (better is None or (du, int(u)) < better):
            better = (du, int(u))
    if better is not None:
        raise NotLocalMinimumError(ERR_NOT_LOCAL_MIN.format(node=v, better=better[1]))


def conflict_search(
    dataset: Dataset,
    graph: ProximityGraph,
    conflicts: ConflictMap | None,
    v: int,
    q: Any,
) -> int:
    """
    Escape from local minimum v: scan conflict sets of the edges passing the angle filter,
    keeping only candidates within 2 * delta(v, q) of v, and return the global argmin of
    (distance to q, id) over v and every scanned node.
    """
    point = query_point(dataset, q)
    v = _check_node(v, graph.n)
    cmap = _require_conflicts(graph, conflicts, v)
    ev = _QueryEvaluator(dataset, point, None, False)
    ev.require(v)
    _local_min_or_raise(graph, v, ev)
    if ev.cache[v] == 0.0:
        return v
    scanned = _conflict_scan(graph, dataset, cmap, v, ev)
    return min([(ev.cache[v], v)] + [(ev.cache[w], w) for w in scanned])[1]


class _EscapingBestFirst(_BestFirst):
    def __init__(
        self, graph: ProximityGraph, dataset: Dataset, conflicts: ConflictMap, ev: _QueryEvaluator
    ) -> None:
        super().__init__(graph, ev)
        self.dataset = dataset
        self.conflicts = conflicts
        self.tried: set[int] = set()
        self.escapes = 0

    def attempt_escape(self) -> bool:
        """Try to leave the current best node through its conflict sets; False ends the search."""
        if self.ev.exhausted:
            return False
        d_top, top = self.ev.best()
        if top in self.tried:
            return bool(self.heap)
        if not self.expand(top):
            return False
        if not self.top_is_local_min():
            return True
        self.tried.add(top)
        for w in _conflict_scan(self.graph, self.dataset, self.conflicts, top, self.ev):
            self.push(w, self.ev.cache[w])
        d_new, best = self.ev.best()
        if d_new < d_top:
            self.escapes += 1
            self.ev.record(best, d_new, TraceAction.ESCAPE)
            logger.debug("Escaped local minimum %d to %d", top, best)
            return True
        return bool(self.heap)


def search_with_escape(
    graph: ProximityGraph,
    dataset: Dataset,
    conflicts: ConflictMap | None,
    entry: int,
    q: Any,
    budget: int | None,
    k: int = 1,
    *,
    phase1_budget: int | None = None,
    trace: bool = False,
) -> SearchResult:
    """
    Best-first search that escapes local minima through conflict sets.

    Best-first runs until its pool empties (or, once, until `phase1_budget` evaluations).
    If the best node found is then a local minimum, a conflict scan from it shares the
    remaining budget; a strictly closer node re-seeds best-first, otherwise the search ends.
    `budget=None` means unlimited.
    """
    _check_positive("budget", budget)
    _check_positive("k", k)
    _check_positive("phase1_budget", phase1_budget)
    point = query_point(dataset, q)
    start = _check_node(entry, graph.n)
    if conflicts is None:
        raise MissingConflictsError(ERR_MISSING_CONFLICTS)
    conflicts.require_graph(graph)

    ev = _QueryEvaluator(dataset, point, budget, trace)
    bf = _EscapingBestFirst(graph, dataset, conflicts, ev)
    bf.push(start, ev.require(start))
    bf.run(phase1_budget)
    while bf.attempt_escape():
        bf.run()
    return ev.result(k, bf.path, bf.top_is_local_min(), bf.escapes)


def pick_entry(dataset: Dataset) -> int:
    """Node closest to the coordinate centroid; ties go to the lower id."""
    points = dataset.points
    centroid = points.mean(axis=0)
    return int(np.argmin(distances_from(points, centroid)))
