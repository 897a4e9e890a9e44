"""
Graph domain models.

ProximityGraph stores directed out-adjacency as one id array and one distance array per node,
both ordered by (distance, id). ConflictMap mirrors that layout with one conflict list per
out-edge. Both are treated as immutable once validated; the helpers that derive a modified
graph (truncation, edge deletion or insertion) always return a new instance.
"""

from typing import Any, Self

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.sparse import csr_matrix

from src.core.constants import (
    ERR_CHECKSUM,
    ERR_CONFLICT_SHAPE,
    ERR_NODE_RANGE,
    ERR_POOL_SPEC,
)
from src.core.exceptions import ChecksumMismatchError, ValidationError
from src.domain_models.enums import PoolKind

IdArray = npt.NDArray[np.int64]
DistArray = npt.NDArray[np.float64]

_EMPTY_IDS: IdArray = np.zeros(0, dtype=np.int64)
_EMPTY_DISTS: DistArray = np.zeros(0, dtype=np.float64)


def _frozen(arr: Any, dtype: type) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True).reshape(-1)
    out.setflags(write=False)
    return out


def _check_sorted(node: int, ids: IdArray, dists: DistArray, what: str) -> None:
    """Lists must be strictly increasing under the (distance, id) key."""
    if ids.shape != dists.shape:
        msg = f"{what} of node {node}: id and distance arrays differ in length."
        raise ValidationError(msg)
    if ids.size < 2:
        return
    d0, d1 = dists[:-1], dists[1:]
    ok = (d0 < d1) | ((d0 == d1) & (ids[:-1] < ids[1:]))
    if not np.all(ok):
        bad = int(np.flatnonzero(~ok)[0])
        msg = f"{what} of node {node} is not sorted by (distance, id) at position {bad}."
        raise ValidationError(msg)


class PoolSpec(BaseModel):
    """Candidate-pool descriptor: every other node, or the l nearest neighbors."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: PoolKind = PoolKind.FULL
    size: int | None = Field(default=None, ge=1, description="l for kNN pools")

    @model_validator(mode="after")
    def validate_size(self) -> Self:
        if self.kind == PoolKind.KNN and self.size is None:
            raise ValueError(ERR_POOL_SPEC.format(spec=str(self)))
        if self.kind == PoolKind.FULL and self.size is not None:
            raise ValueError(ERR_POOL_SPEC.format(spec=str(self)))
        return self

    @classmethod
    def parse(cls, spec: str) -> "PoolSpec":
        """Parse 'full' or 'knn:L'."""
        text = spec.strip().lower()
        if text == PoolKind.FULL:
            return cls()
        head, sep, tail = text.partition(":")
        if head != PoolKind.KNN or not sep or not tail.isdigit() or int(tail) < 1:
            raise ValidationError(ERR_POOL_SPEC.format(spec=spec))
        return cls(kind=PoolKind.KNN, size=int(tail))

    def __str__(self) -> str:
        if self.kind == PoolKind.KNN:
            return f"knn:{self.size}"
        return "full"


class GraphMeta(BaseModel):
    """Build parameters carried with a graph and persisted in its file header."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    degree_bound: int | None = Field(default=None, ge=1, description="m; None means unbounded")
    pool: PoolSpec = Field(default_factory=PoolSpec)
    seed: int = Field(default=0, ge=0, lt=2**64)
    dataset_checksum: int = Field(default=0, ge=0, lt=2**64)


class ProximityGraph(BaseModel):
    """Directed proximity graph over node ids 0..n-1."""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    n: int = Field(..., ge=1)
    neighbors: list[np.ndarray]
    distances: list[np.ndarray]
    meta: GraphMeta = Field(default_factory=GraphMeta)

    @field_validator("neighbors", mode="before")
    @classmethod
    def coerce_neighbors(cls, v: Any) -> list[np.ndarray]:
        return [_frozen(row, np.int64) for row in v]

    @field_validator("distances", mode="before")
    @classmethod
    def coerce_distances(cls, v: Any) -> list[np.ndarray]:
        return [_frozen(row, np.float64) for row in v]

    @model_validator(mode="after")
    def validate_structure(self) -> Self:
        if len(self.neighbors) != self.n or len(self.distances) != self.n:
            msg = f"Expected {self.n} adjacency lists, got {len(self.neighbors)}/{len(self.distances)}."
            raise ValidationError(msg)
        for v, (ids, dists) in enumerate(zip(self.neighbors, self.distances, strict=True)):
            if ids.size == 0:
                continue
            if ids.min() < 0 or ids.max() >= self.n:
                bad = int(ids[(ids < 0) | (ids >= self.n)][0])
                raise ValidationError(ERR_NODE_RANGE.format(node=bad, n=self.n))
            if np.any(ids == v):
                msg = f"Self-loop at node {v}."
                raise ValidationError(msg)
            if np.unique(ids).size != ids.size:
                msg = f"Duplicate neighbor in the list of node {v}."
                raise ValidationError(msg)
            if not np.all(np.isfinite(dists)) or np.any(dists < 0):
                msg = f"Invalid stored distance in the list of node {v}."
                raise ValidationError(msg)
            _check_sorted(v, ids, dists, "Neighbor list")
        return self

    @classmethod
    def empty(cls, n: int, meta: GraphMeta | None = None) -> "ProximityGraph":
        return cls(
            n=n,
            neighbors=[_EMPTY_IDS] * n,
            distances=[_EMPTY_DISTS] * n,
            meta=meta or GraphMeta(),
        )

    def out(self, v: int) -> tuple[IdArray, DistArray]:
        return self.neighbors[v], self.distances[v]

    def degree(self, v: int) -> int:
        return int(self.neighbors[v].size)

    def degrees(self) -> npt.NDArray[np.int64]:
        return np.fromiter((a.size for a in self.neighbors), dtype=np.int64, count=self.n)

    @property
    def num_edges(self) -> int:
        return int(self.degrees().sum())

    def has_edge(self, v: int, u: int) -> bool:
        return bool(np.any(self.neighbors[v] == u))

    def edge_set(self) -> set[tuple[int, int]]:
        return {(v, int(u)) for v, ids in enumerate(self.neighbors) for u in ids}

    def to_csr(self, weighted: bool = False) -> csr_matrix:
        """Adjacency as a scipy CSR matrix (row = source)."""
        deg = self.degrees()
        indptr = np.concatenate(([0], np.cumsum(deg)))
        if self.num_edges:
            indices = np.concatenate(self.neighbors)
            data = np.concatenate(self.distances) if weighted else np.ones(indices.size)
        else:
            indices = _EMPTY_IDS
            data = _EMPTY_DISTS
        return csr_matrix((data, indices, indptr), shape=(self.n, self.n))

    def truncated(self, m: int | None) -> "ProximityGraph":
        """Keep the first m entries of every list; None keeps everything."""
        if m is None:
            return self.model_copy(update={"meta": self.meta.model_copy(update={"degree_bound": None})})
        if m < 1:
            msg = f"Degree bound must be >= 1, got {m}."
            raise ValidationError(msg)
        bound = m if self.meta.degree_bound is None else min(m, self.meta.degree_bound)
        return ProximityGraph(
            n=self.n,
            neighbors=[ids[:m] for ids in self.neighbors],
            distances=[d[:m] for d in self.distances],
            meta=self.meta.model_copy(update={"degree_bound": bound}),
        )

    def without_edge(self, v: int, u: int) -> "ProximityGraph":
        keep = self.neighbors[v] != u
        neighbors = list(self.neighbors)
        distances = list(self.distances)
        neighbors[v] = self.neighbors[v][keep]
        distances[v] = self.distances[v][keep]
        return ProximityGraph(n=self.n, neighbors=neighbors, distances=distances, meta=self.meta)

    def with_edge(self, v: int, u: int, dist: float) -> "ProximityGraph":
        """Insert v->u, keeping the (distance, id) order."""
        if self.has_edge(v, u):
            return self
        ids = np.append(self.neighbors[v], u)
        dists = np.append(self.distances[v], dist)
        order = np.lexsort((ids, dists))
        neighbors = list(self.neighbors)
        distances = list(self.distances)
        neighbors[v] = ids[order]
        distances[v] = dists[order]
        return ProximityGraph(n=self.n, neighbors=neighbors, distances=distances, meta=self.meta)

    def require_dataset(self, checksum: int) -> None:
        if self.meta.dataset_checksum != checksum:
            raise ChecksumMismatchError(
                ERR_CHECKSUM.format(expected=self.meta.dataset_checksum, got=checksum)
            )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProximityGraph):
            return NotImplemented
        return (
            self.n == other.n
            and self.meta == other.meta
            and all(np.array_equal(a, b) for a, b in zip(self.neighbors, other.neighbors, strict=True))
            and all(np.array_equal(a, b) for a, b in zip(self.distances, other.distances, strict=True))
        )

    __hash__ = None  # type: ignore[assignment]


class ConflictMap(BaseModel):
    """For every edge v->u (in list order), the nodes w with u in lune(v, w) and their distance to v."""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    n: int = Field(..., ge=1)
    dataset_checksum: int = Field(default=0, ge=0, lt=2**64)
    ids: list[list[np.ndarray]]
    dists: list[list[np.ndarray]]

    @field_validator("ids", mode="before")
    @classmethod
    def coerce_ids(cls, v: Any) -> list[list[np.ndarray]]:
        return [[_frozen(c, np.int64) for c in per_node] for per_node in v]

    @field_validator("dists", mode="before")
    @classmethod
    def coerce_dists(cls, v: Any) -> list[list[np.ndarray]]:
        return [[_frozen(c, np.float64) for c in per_node] for per_node in v]

    @model_validator(mode="after")
    def validate_structure(self) -> Self:
        if len(self.ids) != self.n or len(self.dists) != self.n:
            msg = f"Expected {self.n} per-node conflict blocks."
            raise ValidationError(msg)
        for v, (id_lists, dist_lists) in enumerate(zip(self.ids, self.dists, strict=True)):
            if len(id_lists) != len(dist_lists):
                raise ValidationError(
                    ERR_CONFLICT_SHAPE.format(node=v, got=len(dist_lists), expected=len(id_lists))
                )
            for ids, dists in zip(id_lists, dist_lists, strict=True):
                if ids.size and (ids.min() < 0 or ids.max() >= self.n):
                    bad = int(ids[(ids < 0) | (ids >= self.n)][0])
                    raise ValidationError(ERR_NODE_RANGE.format(node=bad, n=self.n))
                _check_sorted(v, ids, dists, "Conflict list")
        return self

    def conflicts(self, v: int, edge_index: int) -> tuple[IdArray, DistArray]:
        return self.ids[v][edge_index], self.dists[v][edge_index]

    def edge_counts(self) -> npt.NDArray[np.int64]:
        return np.array([len(lists) for lists in self.ids], dtype=np.int64)

    def total_entries(self) -> int:
        return sum(int(c.size) for lists in self.ids for c in lists)

    def truncated(self, m: int | None) -> "ConflictMap":
        """Conflict lists of the first m edges per node; matches `ProximityGraph.truncated(m)`."""
        if m is None:
            return self
        if m < 1:
            msg = f"Degree bound must be >= 1, got {m}."
            raise ValidationError(msg)
        return ConflictMap(
            n=self.n,
            dataset_checksum=self.dataset_checksum,
            ids=[lists[:m] for lists in self.ids],
            dists=[lists[:m] for lists in self.dists],
        )

    def require_graph(self, graph: ProximityGraph) -> None:
        """Raise unless this map was computed for `graph`."""
        graph.require_dataset(self.dataset_checksum)
        if graph.n != self.n:
            msg = f"Conflict map covers {self.n} nodes, graph has {graph.n}."
            raise ValidationError(msg)
        for v in range(self.n):
            if len(self.ids[v]) != graph.degree(v):
                raise ValidationError(
                    ERR_CONFLICT_SHAPE.format(node=v, got=len(self.ids[v]), expected=graph.degree(v))
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConflictMap):
            return NotImplemented
        if self.n != other.n or self.dataset_checksum != other.dataset_checksum:
            return False
        for a_lists, b_lists in ((self.ids, other.ids), (self.dists, other.dists)):
            for a, b in zip(a_lists, b_lists, strict=True):
                if len(a) != len(b) or not all(np.array_equal(x, y) for x, y in zip(a, b, strict=True)):
                    return False
        return True

    __hash__ = None  # type: ignore[assignment]


class DegreeStats(BaseModel):
    """Out-degree summary of a graph."""

    model_config = ConfigDict(extra="forbid")

    n: int = Field(..., ge=1)
    min: int = Field(..., ge=0)
    max: int = Field(..., ge=0)
    mean: float = Field(..., ge=0.0)
    histogram: dict[int, int] = Field(default_factory=dict, description="degree -> node count")

    @model_validator(mode="after")
    def validate_consistency(self) -> Self:
        if sum(self.histogram.values()) != self.n:
            msg = "Degree histogram does not sum to n."
            raise ValueError(msg)
        if not (self.min <= self.mean + 1e-12 and self.mean <= self.max + 1e-12):
            msg = "Degree stats violate min <= mean <= max."
            raise ValueError(msg)
        return self
