"""
Graph construction.

`select_neighbors` is the per-node edge-selection loop: candidates are visited in (distance, id)
order and y is accepted iff delta(x, y) < delta(r, y) for every already accepted r, until m
neighbors are accepted or candidates run out. Instead of re-testing every accepted r per
candidate, each accepted r immediately marks the remaining candidates it blocks; the first
unmarked candidate is the next one accepted. The outcome is identical to the sequential loop.

Nodes are independent, so a build may be split across threads; lists are assembled by node id
and the graph is bit-identical for any thread count or node order.
"""

import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import TypeVar

import numpy as np
import numpy.typing as npt

from src.core.constants import (
    ERR_KNN_RANGE,
    ERR_POOL_COUNT,
    ERR_POOL_RANGE,
    ERR_POOL_SELF,
    ERR_TOO_FEW_POINTS,
)
from src.core.exceptions import ValidationError
from src.core.mrng.analytics import degree_stats
from src.core.mrng.geometry import distances_from
from src.domain_models.dataset import Dataset
from src.domain_models.enums import PoolKind
from src.domain_models.experiment import BuildParams, BuildReport
from src.domain_models.graph import ConflictMap, PoolSpec, ProximityGraph

logger = logging.getLogger(__name__)

IdArray = npt.NDArray[np.int64]
DistArray = npt.NDArray[np.float64]
T = TypeVar("T")


@dataclass(frozen=True)
class NodeSelection:
    ids: IdArray
    dists: DistArray
    distance_evals: int
    lune_evals: int


def _ordered(ids: IdArray, dists: DistArray) -> tuple[IdArray, DistArray]:
    order = np.lexsort((ids, dists))
    return ids[order], dists[order]


def _map_nodes(fn: Callable[[int], T], nodes: Sequence[int], threads: int) -> list[T]:
    """Apply `fn` per node, in parallel when threads > 1; results follow `nodes` order."""
    if threads <= 1 or len(nodes) < 2:
        return [fn(v) for v in nodes]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, nodes, chunksize=max(1, len(nodes) // (threads * 4))))


def select_neighbors(
    points: npt.NDArray[np.float64], x: int, pool: IdArray | None, m: int | None
) -> NodeSelection:
    """Run the edge-selection loop for node x over `pool` (None = every other node)."""
    n = points.shape[0]
    px = points[x]
    if pool is None:
        cand = np.delete(np.arange(n, dtype=np.int64), x)
        cand_d = distances_from(points[cand], px)
    else:
        cand = pool
        cand_d = distances_from(points[cand], px)
    cand, cand_d = _ordered(cand, cand_d)

    limit = cand.size if m is None else m
    blocked = np.zeros(cand.size, dtype=bool)
    accepted: list[int] = []
    lune_evals = 0
    pos = 0
    while pos < cand.size and len(accepted) < limit:
        if blocked[pos]:
            pos += 1
            continue
        accepted.append(pos)
        if len(accepted) == limit:
            break
        rest = pos + 1 + np.flatnonzero(~blocked[pos + 1 :])
        if rest.size:
            d_ry = distances_from(points[cand[rest]], points[cand[pos]])
            lune_evals += int(rest.size)
            blocked[rest[d_ry <= cand_d[rest]]] = True
        pos += 1

    sel = np.asarray(accepted, dtype=np.int64)
    return NodeSelection(
        ids=cand[sel],
        dists=cand_d[sel],
        distance_evals=int(cand.size),
        lune_evals=lune_evals,
    )


def _validate_pools(pools: Sequence[IdArray], n: int) -> list[IdArray]:
    if len(pools) != n:
        raise ValidationError(ERR_POOL_COUNT.format(n=n, got=len(pools)))
    clean: list[IdArray] = []
    for x, pool in enumerate(pools):
        arr = np.unique(np.asarray(pool, dtype=np.int64))
        if arr.size and (arr[0] < 0 or arr[-1] >= n):
            bad = int(arr[0] if arr[0] < 0 else arr[-1])
            raise ValidationError(ERR_POOL_RANGE.format(node=x, bad=bad))
        if np.any(arr == x):
            raise ValidationError(ERR_POOL_SELF.format(node=x))
        clean.append(arr)
    return clean


def knn_pools(dataset: Dataset, size: int, threads: int = 1) -> list[IdArray]:
    """The `size` exact nearest neighbors of every node, ordered by (distance, id)."""
    n = dataset.n
    if not (1 <= size <= n - 1):
        raise ValidationError(ERR_KNN_RANGE.format(size=size, limit=n - 1))
    points = dataset.points
    ids = np.arange(n, dtype=np.int64)

    def pool_of(x: int) -> IdArray:
        d = distances_from(points, points[x])
        d[x] = np.inf
        order = np.lexsort((ids, d))
        return order[:size].astype(np.int64)

    return _map_nodes(pool_of, range(n), threads)


def build_with_report(
    dataset: Dataset,
    params: BuildParams,
    pools: Sequence[IdArray] | None = None,
    *,
    threads: int = 1,
    node_order: Sequence[int] | None = None,
) -> tuple[ProximityGraph, BuildReport]:
    """
    Build a generalized graph and report its cost.

    With `pools=None` the pool is derived from `params.pool`: every other node for "full",
    the l exact nearest neighbors (counted in `pool_distance_evals`) for "knn:l".
    """
    n = dataset.n
    if n < 2:
        raise ValidationError(ERR_TOO_FEW_POINTS.format(n=n))
    started = time.perf_counter()
    logger.info(
        "Building graph n=%d d=%d m=%s pool=%s threads=%d",
        n,
        dataset.dim,
        params.degree_bound if params.degree_bound is not None else "unbounded",
        params.pool,
        threads,
    )

    pool_evals = 0
    node_pools: list[IdArray] | None
    if pools is not None:
        node_pools = _validate_pools(pools, n)
    elif params.pool.kind == PoolKind.KNN:
        node_pools = knn_pools(dataset, int(params.pool.size or 0), threads)
        pool_evals = n * (n - 1)
    else:
        node_pools = None

    order = list(range(n)) if node_order is None else [int(v) for v in node_order]
    if sorted(order) != list(range(n)):
        msg = "node_order must be a permutation of 0..n-1."
        raise ValidationError(msg)

    points = dataset.points
    m = params.degree_bound

    def run(x: int) -> NodeSelection:
        return select_neighbors(points, x, None if node_pools is None else node_pools[x], m)

    selections: list[NodeSelection | None] = [None] * n
    for x, sel in zip(order, _map_nodes(run, order, threads), strict=True):
        selections[x] = sel
    done = [s for s in selections if s is not None]

    graph = ProximityGraph(
        n=n,
        neighbors=[s.ids for s in done],
        distances=[s.dists for s in done],
        meta=params.meta(dataset.checksum),
    )
    elapsed = time.perf_counter() - started
    report = BuildReport(
        params=params,
        n=n,
        d=dataset.dim,
        distance_evals=sum(s.distance_evals for s in done),
        lune_evals=sum(s.lune_evals for s in done),
        pool_distance_evals=pool_evals,
        wall_time_s=elapsed,
        threads=threads,
        degrees=degree_stats(graph),
    )
    logger.info(
        "Built graph: %d edges, mean degree %.2f, %d distance evals in %.2fs",
        graph.num_edges,
        report.degrees.mean,
        report.distance_evals,
        elapsed,
    )
    return graph, report


def build_generalized(
    dataset: Dataset,
    params: BuildParams,
    pools: Sequence[IdArray] | None = None,
    *,
    threads: int = 1,
    node_order: Sequence[int] | None = None,
) -> ProximityGraph:
    graph, _ = build_with_report(dataset, params, pools, threads=threads, node_order=node_order)
    return graph


def build_mrng(
    dataset: Dataset, *, seed: int = 0, threads: int = 1, node_order: Sequence[int] | None = None
) -> ProximityGraph:
    """Exact MRNG: full pools, no degree bound."""
    params = BuildParams(degree_bound=None, pool=PoolSpec(), seed=seed)
    return build_generalized(dataset, params, threads=threads, node_order=node_order)


def conflicts_of(
    points: npt.NDArray[np.float64], v: int, out_ids: IdArray
) -> tuple[list[IdArray], list[DistArray]]:
    """C(v->u) for every u in `out_ids`: all w with delta(v,u) < delta(v,w) and delta(u,w) < delta(v,w)."""
    ids = np.arange(points.shape[0], dtype=np.int64)
    dv = distances_from(points, points[v])
    id_lists: list[IdArray] = []
    dist_lists: list[DistArray] = []
    for u in out_ids:
        du = distances_from(points, points[int(u)])
        mask = (dv[int(u)] < dv) & (du < dv)
        w = ids[mask]
        w, wd = _ordered(w, dv[mask])
        id_lists.append(w)
        dist_lists.append(wd)
    return id_lists, dist_lists


def compute_conflicts(dataset: Dataset, graph: ProximityGraph, threads: int = 1) -> ConflictMap:
    """Exhaustive conflict sets for every edge of `graph`."""
    graph.require_dataset(dataset.checksum)
    started = time.perf_counter()
    points = dataset.points

    def run(v: int) -> tuple[list[IdArray], list[DistArray]]:
        return conflicts_of(points, v, graph.neighbors[v])

    blocks = _map_nodes(run, range(graph.n), threads)
    conflicts = ConflictMap(
        n=graph.n,
        dataset_checksum=dataset.checksum,
        ids=[b[0] for b in blocks],
        dists=[b[1] for b in blocks],
    )
    logger.info(
        "Computed conflict map: %d entries over %d edges in %.2fs",
        conflicts.total_entries(),
        graph.num_edges,
        time.perf_counter() - started,
    )
    return conflicts
