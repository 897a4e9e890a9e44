"""
Independent checkers for the structural properties of monotonic relative neighborhood graphs.

Every checker returns a CheckReport. Failed reports carry the lexicographically smallest
counterexample together with the raw distances or angles needed to re-verify it.
"""

import logging
import math
from typing import Any

import numpy as np
import numpy.typing as npt
from scipy.sparse import csgraph, csr_matrix
from scipy.stats import norm, qmc

from src.core.config import get_settings
from src.core.constants import (
    CHECK_ANGLES,
    CHECK_DEFINITION,
    CHECK_LEMMA4,
    CHECK_MINIMALITY,
    CHECK_MONOTONIC,
    ERR_K_RANGE,
    ERR_LEMMA4_PRECONDITION,
)
from src.core.exceptions import DegenerateGeometryError, ValidationError
from src.core.mrng.geometry import angle_at, distances_from, f_theta, philox_generator
from src.core.mrng.search import filtered_edges, query_point
from src.domain_models.dataset import Dataset, as_point
from src.domain_models.graph import ConflictMap, ProximityGraph
from src.domain_models.verification import CheckReport

logger = logging.getLogger(__name__)

IntArray = npt.NDArray[np.int64]

DISTANCE_RTOL = 1e-9
DISTANCE_ATOL = 1e-15
NEAR_BOUNDARY = 1e-6


def _failed(report: CheckReport) -> CheckReport:
    logger.warning("Check '%s' failed: %s", report.check, report.counterexample)
    return report


def brute_force_knn(dataset: Dataset, q: Any, k: int) -> list[tuple[int, float]]:
    """Exact k nearest neighbors of q ordered by (distance, id)."""
    if not (1 <= k <= dataset.n):
        raise ValidationError(ERR_K_RANGE.format(k=k, n=dataset.n))
    point = query_point(dataset, q)
    d = distances_from(dataset.points, point)
    order = np.lexsort((np.arange(dataset.n), d))[:k]
    return [(int(i), float(d[i])) for i in order]


def nearest_ids(dataset: Dataset, queries: npt.NDArray[np.float64]) -> IntArray:
    """Top-1 ground truth for a batch of queries; ties go to the lower id."""
    out = np.empty(queries.shape[0], dtype=np.int64)
    for i, q in enumerate(queries):
        out[i] = int(np.argmin(distances_from(dataset.points, q)))
    return out


def _edge_arrays(graph: ProximityGraph) -> tuple[IntArray, IntArray]:
    src = np.repeat(np.arange(graph.n, dtype=np.int64), graph.degrees())
    dst = np.concatenate(graph.neighbors) if graph.num_edges else np.zeros(0, dtype=np.int64)
    return src, dst.astype(np.int64)


def _reaching(
    n: int, src: IntArray, dst: IntArray, keep: npt.NDArray[np.bool_], target: int
) -> npt.NDArray[np.bool_]:
    """Nodes that reach `target` using only the kept edges (reverse BFS from target)."""
    reverse = csr_matrix(
        (np.ones(int(keep.sum()), dtype=np.int8), (dst[keep], src[keep])), shape=(n, n)
    )
    order = csgraph.breadth_first_order(reverse, target, directed=True, return_predecessors=False)
    reached = np.zeros(n, dtype=bool)
    reached[order] = True
    return reached


def _monotonic_failures(
    graph: ProximityGraph, dataset: Dataset
) -> tuple[tuple[int, int] | None, int]:
    """Smallest failing (p, q) and the number of failing pairs."""
    n = graph.n
    points = dataset.points
    src, dst = _edge_arrays(graph)
    best: tuple[int, int] | None = None
    failures = 0
    for t in range(n):
        dq = distances_from(points, points[t])
        reached = _reaching(n, src, dst, dq[dst] < dq[src], t)
        missing = np.flatnonzero(~reached)
        if missing.size:
            failures += int(missing.size)
            cand = (int(missing[0]), t)
            if best is None or cand < best:
                best = cand
    return best, failures


def is_monotonic(graph: ProximityGraph, dataset: Dataset) -> CheckReport:
    """Exact decision: every q is reachable from every p along edges that strictly approach q."""
    graph.require_dataset(dataset.checksum)
    best, failures = _monotonic_failures(graph, dataset)
    pairs = graph.n * (graph.n - 1)
    if best is None:
        return CheckReport.ok(CHECK_MONOTONIC, pairs_checked=pairs, edges=graph.num_edges)
    p, q = best
    return _failed(
        CheckReport.fail(
            CHECK_MONOTONIC,
            {"p": p, "q": q, "distance": float(distances_from(dataset.points[[p]], dataset.points[q])[0])},
            pairs_checked=pairs,
            failing_pairs=failures,
        )
    )


def _stored_distance_violation(graph: ProximityGraph, dataset: Dataset) -> dict[str, Any] | None:
    points = dataset.points
    for x in range(graph.n):
        ids, stored = graph.out(x)
        if ids.size == 0:
            continue
        actual = distances_from(points[ids], points[x])
        bad = np.flatnonzero(np.abs(actual - stored) > DISTANCE_RTOL * actual + DISTANCE_ATOL)
        if bad.size:
            i = int(bad[0])
            return {
                "kind": "stored-distance",
                "x": x,
                "y": int(ids[i]),
                "stored": float(stored[i]),
                "actual": float(actual[i]),
            }
    return None


def _definition_violation(x: int, graph: ProximityGraph, points: npt.NDArray[np.float64]) -> dict[str, Any] | None:
    n = graph.n
    ids = graph.neighbors[x]
    dx = distances_from(points, points[x])
    blocked = np.zeros(n, dtype=bool)
    witness = np.full(n, -1, dtype=np.int64)
    for z in np.sort(ids):
        dz = distances_from(points, points[int(z)])
        hit = (dx[int(z)] < dx) & (dz < dx) & ~blocked
        witness[hit] = int(z)
        blocked |= hit
    present = np.zeros(n, dtype=bool)
    present[ids] = True
    blocked[x] = True
    present[x] = True
    extra = present & blocked
    extra[x] = False
    missing = ~present & ~blocked
    bad = np.flatnonzero(extra | missing)
    if bad.size == 0:
        return None
    y = int(bad[0])
    if extra[y]:
        z = int(witness[y])
        dz = distances_from(points[[y]], points[z])[0]
        return {
            "kind": "edge-with-blocker",
            "x": x,
            "y": y,
            "z": z,
            "d_xy": float(dx[y]),
            "d_xz": float(dx[z]),
            "d_zy": float(dz),
        }
    return {"kind": "missing-edge", "x": x, "y": y, "d_xy": float(dx[y])}


def check_mrng_definition(graph: ProximityGraph, dataset: Dataset) -> CheckReport:
    """x->y is an edge iff no out-neighbor of x lies in lune(x, y), for all ordered pairs."""
    graph.require_dataset(dataset.checksum)
    stored = _stored_distance_violation(graph, dataset)
    if stored is not None:
        return _failed(CheckReport.fail(CHECK_DEFINITION, stored))
    points = dataset.points
    for x in range(graph.n):
        violation = _definition_violation(x, graph, points)
        if violation is not None:
            return _failed(CheckReport.fail(CHECK_DEFINITION, violation, pairs_checked=(x + 1) * (graph.n - 1)))
    return CheckReport.ok(CHECK_DEFINITION, pairs_checked=graph.n * (graph.n - 1), edges=graph.num_edges)


def check_edge_minimality(
    graph: ProximityGraph, dataset: Dataset, sample: int | None = None, seed: int = 0
) -> CheckReport:
    """
    Deleting any edge x->y must break monotonicity at the pair (x, y).

    `sample=None` checks every edge; otherwise a seeded sample of that many edges.
    """
    graph.require_dataset(dataset.checksum)
    n = graph.n
    points = dataset.points
    src, dst = _edge_arrays(graph)
    chosen = np.arange(src.size)
    if sample is not None and sample < src.size:
        chosen = np.sort(philox_generator(seed, 3).choice(src.size, size=sample, replace=False))

    for e in chosen.tolist():
        x, y = int(src[e]), int(dst[e])
        dq = distances_from(points, points[y])
        keep = dq[dst] < dq[src]
        keep[e] = False
        if _reaching(n, src, dst, keep, y)[x]:
            reduced = graph.without_edge(x, y)
            best, _ = _monotonic_failures(reduced, dataset)
            return _failed(
                CheckReport.fail(
                    CHECK_MINIMALITY,
                    {"x": x, "y": y, "still_monotonic": best is None, "d_xy": float(dq[x])},
                    edges_checked=int(chosen.size),
                )
            )
    return CheckReport.ok(CHECK_MINIMALITY, edges_checked=int(chosen.size))


def check_angle_separation(
    graph: ProximityGraph, dataset: Dataset, tolerance: float | None = None
) -> CheckReport:
    """Any two out-edges of a node are at least 60 degrees apart (up to `tolerance` radians)."""
    graph.require_dataset(dataset.checksum)
    tol = get_settings().geometry.angle_tolerance if tolerance is None else tolerance
    limit = math.pi / 3.0
    points = dataset.points
    pairs = 0
    near = 0
    smallest = math.pi
    for v in range(graph.n):
        ids = np.sort(graph.neighbors[v])
        if ids.size < 2:
            continue
        rays = points[ids] - points[v]
        rays /= np.linalg.norm(rays, axis=1)[:, None]
        angles = np.arccos(np.clip(rays @ rays.T, -1.0, 1.0))
        iu, ju = np.triu_indices(ids.size, k=1)
        upper = angles[iu, ju]
        pairs += int(upper.size)
        near += int(np.count_nonzero(np.abs(upper - limit) < NEAR_BOUNDARY))
        smallest = min(smallest, float(upper.min()))
        bad = np.flatnonzero(upper < limit - tol)
        if bad.size:
            i = int(bad[0])
            u1, u2 = int(ids[iu[i]]), int(ids[ju[i]])
            return _failed(
                CheckReport.fail(
                    CHECK_ANGLES,
                    {"v": v, "u1": u1, "u2": u2, "angle": angle_at(points[v], points[u1], points[u2])},
                    pairs_checked=pairs,
                    near_boundary=near,
                )
            )
    return CheckReport.ok(CHECK_ANGLES, pairs_checked=pairs, near_boundary=near, min_angle=smallest)


def check_filter_soundness(
    dataset: Dataset, graph: ProximityGraph, conflicts: ConflictMap, v: int, q: Any
) -> CheckReport:
    """No edge rejected by the angle filter at v may hold a conflicting node closer to q than v."""
    point = query_point(dataset, q)
    points = dataset.points
    r = float(distances_from(points[[v]], point)[0])
    if r == 0.0:
        return CheckReport.ok(CHECK_LEMMA4, edges_filtered=0)
    kept = set(filtered_edges(graph, dataset, v, point, r).tolist())
    filtered = 0
    for pos, u in enumerate(graph.neighbors[v].tolist()):
        if pos in kept:
            continue
        filtered += 1
        w_ids, _ = conflicts.conflicts(v, pos)
        if w_ids.size == 0:
            continue
        dw = distances_from(points[w_ids], point)
        closer = np.flatnonzero(dw < r)
        if closer.size:
            w = int(w_ids[closer[0]])
            return _failed(
                CheckReport.fail(
                    CHECK_LEMMA4,
                    {"v": v, "u": u, "w": w, "d_vq": r, "d_wq": float(dw[closer[0]])},
                    edges_filtered=filtered,
                )
            )
    return CheckReport.ok(CHECK_LEMMA4, edges_filtered=filtered)


def _plane_basis(v: npt.NDArray[np.float64], q: npt.NDArray[np.float64], u: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Orthonormal rows spanning a plane through v that contains q and u (one row in d=1)."""
    e1 = (q - v) / np.linalg.norm(q - v)
    if v.size == 1:
        return e1[None, :]
    w = u - v
    e2 = w - np.dot(w, e1) * e1
    if np.linalg.norm(e2) <= 1e-12 * max(1.0, float(np.linalg.norm(w))):
        axis = np.zeros_like(e1)
        axis[int(np.argmin(np.abs(e1)))] = 1.0
        e2 = axis - np.dot(axis, e1) * e1
    return np.vstack((e1, e2 / np.linalg.norm(e2)))


def _ball_samples(count: int, d: int) -> npt.NDArray[np.float64]:
    """Quasi-uniform points of the closed unit ball in R^d (rows)."""
    if d == 1:
        return np.linspace(-1.0, 1.0, count)[:, None]
    halton = qmc.Halton(d=d + 1, scramble=False)
    # index 0 is the origin of the cube; ppf(0) is -inf
    halton.fast_forward(1)
    h = np.clip(halton.random(count), 1e-12, 1.0 - 1e-12)
    gauss = norm.ppf(h[:, :d])
    lengths = np.maximum(np.linalg.norm(gauss, axis=1), 1e-300)
    return gauss / lengths[:, None] * (h[:, d] ** (1.0 / d))[:, None]


def _circle_samples(count: int, basis: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Unit circle of the plane spanned by `basis`, in ambient coordinates."""
    if basis.shape[0] == 1:
        return np.vstack((basis[0], -basis[0]))
    ring = np.linspace(0.0, 2.0 * math.pi, count, endpoint=False)
    return np.column_stack((np.cos(ring), np.sin(ring))) @ basis


def check_lemma4_sampling(
    v: Any,
    q: Any,
    u: Any,
    samples: int | None = None,
    boundary_samples: int | None = None,
    band: float | None = None,
) -> CheckReport:
    """
    Compare the sampled predicate "some w in B(q, delta(v,q)) has u in lune(v, w)" with the
    closed form delta(v,u) < delta(v,q) * f(theta). Disagreement inside the relative band
    around the threshold is tolerated.
    """
    cfg = get_settings().geometry
    interior = cfg.lemma4_interior_samples if samples is None else samples
    ring = cfg.lemma4_boundary_samples if boundary_samples is None else boundary_samples
    rel_band = cfg.lemma4_band if band is None else band

    pv, pq, pu = as_point(v), as_point(q), as_point(u)
    if not (pv.shape == pq.shape == pu.shape):
        msg = "v, q and u must share one dimension."
        raise ValidationError(msg)
    r = float(distances_from(pq[None, :], pv)[0])
    d_uq = float(distances_from(pu[None, :], pq)[0])
    d_vu = float(distances_from(pu[None, :], pv)[0])
    if r == 0.0 or d_vu == 0.0:
        raise DegenerateGeometryError(ERR_LEMMA4_PRECONDITION)

    theta = angle_at(pv, pq, pu)
    threshold = r * f_theta(theta)
    unit = np.vstack((_ball_samples(interior, pv.size), _circle_samples(ring, _plane_basis(pv, pq, pu))))
    ws = pq + r * unit
    d_vw = distances_from(ws, pv)
    d_uw = distances_from(ws, pu)
    sampled = bool(np.any((d_vu < d_vw) & (d_uw < d_vw)))
    closed = d_vu < threshold
    in_band = abs(d_vu - threshold) < rel_band * r
    stats: dict[str, int | float] = {
        "theta": theta,
        "threshold": threshold,
        "d_vu": d_vu,
        "sampled": int(sampled),
        "closed_form": int(closed),
        "samples": int(ws.shape[0]),
        "in_band": int(in_band),
        "precondition": int(d_uq >= r),
    }
    if sampled == closed or in_band:
        return CheckReport.ok(CHECK_LEMMA4, **stats)
    return _failed(
        CheckReport.fail(
            CHECK_LEMMA4,
            {"v": pv.tolist(), "q": pq.tolist(), "u": pu.tolist(), "theta": theta, "threshold": threshold},
            **stats,
        )
    )


def sample_lemma4_triples(
    count: int, d: int, seed: int
) -> list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]]:
    """Random (v, q, u) in [0,1)^d with delta(u,q) >= delta(v,q) > 0, by rejection."""
    rng = philox_generator(seed, 2)
    out: list[tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]] = []
    while len(out) < count:
        v, q, u = rng.random((3, d))
        r = float(np.linalg.norm(q - v))
        if r > 0.0 and float(np.linalg.norm(u - q)) >= r and float(np.linalg.norm(u - v)) > 0.0:
            out.append((v, q, u))
    return out
