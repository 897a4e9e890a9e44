import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.sparse import csgraph

from src.core.exceptions import CalculationError
from src.core.mrng.geometry import distances_from
from src.domain_models.dataset import Dataset
from src.domain_models.graph import ConflictMap, DegreeStats, ProximityGraph

logger = logging.getLogger(__name__)


def degree_stats(graph: ProximityGraph) -> DegreeStats:
    """Exact min/max/mean out-degree and the full histogram."""
    deg = graph.degrees()
    values, counts = np.unique(deg, return_counts=True)
    return DegreeStats(
        n=graph.n,
        min=int(deg.min()),
        max=int(deg.max()),
        mean=float(deg.mean()),
        histogram={int(v): int(c) for v, c in zip(values, counts, strict=True)},
    )


def connectivity(graph: ProximityGraph) -> tuple[int, int]:
    """(strongly, weakly) connected component counts."""
    try:
        adj = graph.to_csr()
        strong, _ = csgraph.connected_components(adj, directed=True, connection="strong")
        weak, _ = csgraph.connected_components(adj, directed=True, connection="weak")
    except Exception as e:
        msg = "Connected-component analysis failed"
        logger.exception(msg)
        error_msg = f"{msg}: {e}"
        raise CalculationError(error_msg) from e
    return int(strong), int(weak)


def _histogram(counts: np.ndarray) -> Counter[int]:
    hits = counts[counts > 0]
    if hits.size == 0:
        return Counter()
    binned = np.bincount(hits)
    return Counter({int(k): int(c) for k, c in enumerate(binned) if c})


def conflict_multiplicity(conflicts: ConflictMap) -> dict[int, int]:
    """Histogram of k_v(w) from a stored conflict map."""
    total: Counter[int] = Counter()
    for v in range(conflicts.n):
        lists = conflicts.ids[v]
        if not lists:
            continue
        counts = np.bincount(np.concatenate(lists), minlength=conflicts.n)
        total.update(_histogram(counts))
    return dict(sorted(total.items()))


def stream_conflict_multiplicity(
    dataset: Dataset, graph: ProximityGraph, threads: int = 1
) -> dict[int, int]:
    """
    Histogram of k_v(w) computed node by node without materialising the conflict map.

    Per-node histograms are merged by addition, so the result does not depend on threads.
    """
    graph.require_dataset(dataset.checksum)
    points = dataset.points

    def per_node(v: int) -> Counter[int]:
        dv = distances_from(points, points[v])
        counts = np.zeros(dataset.n, dtype=np.int64)
        for u in graph.neighbors[v]:
            du = distances_from(points, points[int(u)])
            counts += (dv[int(u)] < dv) & (du < dv)
        return _histogram(counts)

    total: Counter[int] = Counter()
    if threads <= 1:
        for v in range(graph.n):
            total.update(per_node(v))
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            for part in executor.map(per_node, range(graph.n)):
                total.update(part)
    return dict(sorted(total.items()))
