"""
Graph and conflict-map files.

Graph:    b"MRNGG", u8 version, u32 n, u64 dataset checksum,
          meta (u32 m or 0xFFFFFFFF, u8 pool tag, u32 pool size, u64 seed),
          then per node u32 degree and `degree` packed (u32 id, f64 distance) pairs.
Conflict: b"MRNGC", u8 version, u32 n, u64 dataset checksum,
          then per node u32 edge count and per edge u32 length plus (u32 id, f64 distance) pairs.
Both end with an 8-byte BLAKE2b digest of all preceding bytes. All little-endian.
"""

import hashlib
import logging
import struct
from pathlib import Path

import numpy as np
import numpy.typing as npt

from src.core.constants import (
    CONFLICT_MAGIC,
    CONFLICT_VERSION,
    DIGEST_SIZE,
    ERR_BAD_MAGIC,
    ERR_BAD_VERSION,
    ERR_DIGEST,
    ERR_TRUNCATED,
    GRAPH_MAGIC,
    GRAPH_VERSION,
    UNBOUNDED_DEGREE,
)
from src.core.exceptions import GraphFormatError, ValidationError
from src.core.services.file_service import FileService
from src.domain_models.dataset import Dataset
from src.domain_models.enums import PoolKind
from src.domain_models.graph import ConflictMap, GraphMeta, PoolSpec, ProximityGraph

logger = logging.getLogger(__name__)

PAIR_DTYPE = np.dtype([("id", "<u4"), ("dist", "<f8")])
_PREFIX = struct.Struct("<5sBIQ")
_META = struct.Struct("<IBIQ")
_U32 = struct.Struct("<I")
_POOL_TAGS = {PoolKind.FULL: 0, PoolKind.KNN: 1}
_TAG_POOLS = {v: k for k, v in _POOL_TAGS.items()}


def _digest(body: bytes) -> bytes:
    return hashlib.blake2b(body, digest_size=DIGEST_SIZE).digest()


def _pairs(ids: npt.NDArray[np.int64], dists: npt.NDArray[np.float64]) -> bytes:
    rec = np.empty(ids.size, dtype=PAIR_DTYPE)
    rec["id"] = ids
    rec["dist"] = dists
    return _U32.pack(ids.size) + rec.tobytes()


class _Reader:
    """Bounds-checked cursor over a file body."""

    def __init__(self, body: bytes, path: str) -> None:
        self.body = body
        self.path = path
        self.pos = 0

    def take(self, size: int) -> int:
        start = self.pos
        if start + size > len(self.body):
            raise GraphFormatError(ERR_TRUNCATED.format(path=self.path))
        self.pos += size
        return start

    def u32(self) -> int:
        return int(_U32.unpack_from(self.body, self.take(_U32.size))[0])

    def pairs(self) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
        count = self.u32()
        start = self.take(count * PAIR_DTYPE.itemsize)
        rec = np.frombuffer(self.body, dtype=PAIR_DTYPE, count=count, offset=start)
        return rec["id"].astype(np.int64), rec["dist"].astype(np.float64)

    def finish(self) -> None:
        if self.pos != len(self.body):
            raise GraphFormatError(ERR_TRUNCATED.format(path=self.path))


def _open(data: bytes, magic: bytes, version: int, path: str) -> tuple[_Reader, int, int]:
    """Check framing and digest; returns a reader positioned after the prefix, n and checksum."""
    if len(data) < _PREFIX.size + DIGEST_SIZE:
        raise GraphFormatError(ERR_TRUNCATED.format(path=path))
    got_magic, got_version, n, checksum = _PREFIX.unpack_from(data)
    if got_magic != magic:
        raise GraphFormatError(ERR_BAD_MAGIC.format(magic=got_magic, path=path))
    if got_version != version:
        raise GraphFormatError(ERR_BAD_VERSION.format(version=got_version, path=path))
    body, footer = data[:-DIGEST_SIZE], data[-DIGEST_SIZE:]
    if _digest(body) != footer:
        raise GraphFormatError(ERR_DIGEST.format(path=path))
    reader = _Reader(body, path)
    reader.take(_PREFIX.size)
    return reader, int(n), int(checksum)


def encode_graph(graph: ProximityGraph) -> bytes:
    meta = graph.meta
    parts = [
        _PREFIX.pack(GRAPH_MAGIC, GRAPH_VERSION, graph.n, meta.dataset_checksum),
        _META.pack(
            UNBOUNDED_DEGREE if meta.degree_bound is None else meta.degree_bound,
            _POOL_TAGS[meta.pool.kind],
            meta.pool.size or 0,
            meta.seed,
        ),
    ]
    parts.extend(_pairs(ids, dists) for ids, dists in zip(graph.neighbors, graph.distances, strict=True))
    body = b"".join(parts)
    return body + _digest(body)


def decode_graph(data: bytes, path: str = "<memory>") -> ProximityGraph:
    reader, n, checksum = _open(data, GRAPH_MAGIC, GRAPH_VERSION, path)
    m, tag, size, seed = _META.unpack_from(reader.body, reader.take(_META.size))
    if tag not in _TAG_POOLS:
        msg = f"Unknown pool tag {tag} in {path}."
        raise GraphFormatError(msg)
    neighbors, distances = [], []
    for _ in range(n):
        ids, dists = reader.pairs()
        neighbors.append(ids)
        distances.append(dists)
    reader.finish()
    try:
        kind = _TAG_POOLS[tag]
        meta = GraphMeta(
            degree_bound=None if m == UNBOUNDED_DEGREE else m,
            pool=PoolSpec(kind=kind, size=size if kind == PoolKind.KNN else None),
            seed=seed,
            dataset_checksum=checksum,
        )
        return ProximityGraph(n=n, neighbors=neighbors, distances=distances, meta=meta)
    except (ValueError, ValidationError) as e:
        msg = f"Graph file {path} violates graph invariants: {e}"
        raise GraphFormatError(msg) from e


def encode_conflicts(conflicts: ConflictMap) -> bytes:
    parts = [_PREFIX.pack(CONFLICT_MAGIC, CONFLICT_VERSION, conflicts.n, conflicts.dataset_checksum)]
    for id_lists, dist_lists in zip(conflicts.ids, conflicts.dists, strict=True):
        parts.append(_U32.pack(len(id_lists)))
        parts.extend(_pairs(ids, dists) for ids, dists in zip(id_lists, dist_lists, strict=True))
    body = b"".join(parts)
    return body + _digest(body)


def decode_conflicts(data: bytes, path: str = "<memory>") -> ConflictMap:
    reader, n, checksum = _open(data, CONFLICT_MAGIC, CONFLICT_VERSION, path)
    ids: list[list[npt.NDArray[np.int64]]] = []
    dists: list[list[npt.NDArray[np.float64]]] = []
    for _ in range(n):
        edges = reader.u32()
        node_ids, node_dists = [], []
        for _ in range(edges):
            w, wd = reader.pairs()
            node_ids.append(w)
            node_dists.append(wd)
        ids.append(node_ids)
        dists.append(node_dists)
    reader.finish()
    try:
        return ConflictMap(n=n, dataset_checksum=checksum, ids=ids, dists=dists)
    except (ValueError, ValidationError) as e:
        msg = f"Conflict file {path} violates conflict-map invariants: {e}"
        raise GraphFormatError(msg) from e


def save_graph(graph: ProximityGraph, path: str | Path, files: FileService | None = None) -> Path:
    target = (files or FileService()).write_bytes(encode_graph(graph), path)
    logger.info("Saved graph n=%d edges=%d to %s", graph.n, graph.num_edges, target)
    return target


def load_graph(
    path: str | Path, dataset: Dataset | None = None, files: FileService | None = None
) -> ProximityGraph:
    """Load a graph; with `dataset`, also require that it was built over that dataset."""
    graph = decode_graph((files or FileService()).read_bytes(path), str(path))
    if dataset is not None:
        graph.require_dataset(dataset.checksum)
    logger.info("Loaded graph n=%d edges=%d from %s", graph.n, graph.num_edges, path)
    return graph


def save_conflicts(conflicts: ConflictMap, path: str | Path, files: FileService | None = None) -> Path:
    target = (files or FileService()).write_bytes(encode_conflicts(conflicts), path)
    logger.info("Saved conflict map with %d entries to %s", conflicts.total_entries(), target)
    return target


def load_conflicts(
    path: str | Path, graph: ProximityGraph | None = None, files: FileService | None = None
) -> ConflictMap:
    """Load a conflict map; with `graph`, also require that it matches that graph edge for edge."""
    conflicts = decode_conflicts((files or FileService()).read_bytes(path), str(path))
    if graph is not None:
        conflicts.require_graph(graph)
    logger.info("Loaded conflict map with %d entries from %s", conflicts.total_entries(), path)
    return conflicts
