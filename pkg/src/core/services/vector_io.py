"""
Vector file formats.

vecbin: b"MRNG", u8 version, u32 n, u32 d, then n*d float32 values row-major.
fvecs:  per vector, an int32 dimension followed by that many float32 values.
All little-endian. Coordinates are widened to float64 on load.
"""

import logging
import struct
from pathlib import Path

import numpy as np
import numpy.typing as npt

from src.core.constants import (
    ERR_BAD_MAGIC,
    ERR_BAD_VERSION,
    ERR_TRUNCATED,
    VECBIN_MAGIC,
    VECBIN_VERSION,
)
from src.core.exceptions import GraphFormatError
from src.core.services.file_service import FileService
from src.domain_models.dataset import Dataset

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

_VECBIN_HEADER = struct.Struct("<4sBII")
FVECS_SUFFIXES = (".fvecs", ".fvec")


def encode_vecbin(points: FloatArray) -> bytes:
    arr = np.ascontiguousarray(points, dtype="<f4")
    n, d = arr.shape
    return _VECBIN_HEADER.pack(VECBIN_MAGIC, VECBIN_VERSION, n, d) + arr.tobytes()


def decode_vecbin(data: bytes, path: str = "<memory>") -> FloatArray:
    if len(data) < _VECBIN_HEADER.size:
        raise GraphFormatError(ERR_TRUNCATED.format(path=path))
    magic, version, n, d = _VECBIN_HEADER.unpack_from(data)
    if magic != VECBIN_MAGIC:
        raise GraphFormatError(ERR_BAD_MAGIC.format(magic=magic, path=path))
    if version != VECBIN_VERSION:
        raise GraphFormatError(ERR_BAD_VERSION.format(version=version, path=path))
    if len(data) != _VECBIN_HEADER.size + 4 * n * d:
        raise GraphFormatError(ERR_TRUNCATED.format(path=path))
    payload = np.frombuffer(data, dtype="<f4", count=n * d, offset=_VECBIN_HEADER.size)
    return payload.reshape(n, d).astype(np.float64)


def encode_fvecs(points: FloatArray) -> bytes:
    arr = np.ascontiguousarray(points, dtype="<f4")
    n, d = arr.shape
    rows = np.empty((n, d + 1), dtype="<i4")
    rows[:, 0] = d
    rows[:, 1:] = arr.view("<i4")
    return rows.tobytes()


def decode_fvecs(data: bytes, path: str = "<memory>") -> FloatArray:
    if len(data) < 4 or len(data) % 4:
        raise GraphFormatError(ERR_TRUNCATED.format(path=path))
    words = np.frombuffer(data, dtype="<i4")
    d = int(words[0])
    if d < 1 or words.size % (d + 1):
        raise GraphFormatError(ERR_TRUNCATED.format(path=path))
    rows = words.reshape(-1, d + 1)
    if not np.all(rows[:, 0] == d):
        msg = f"Inconsistent per-vector dimensions in {path}."
        raise GraphFormatError(msg)
    return rows[:, 1:].copy().view("<f4").astype(np.float64)


def is_fvecs_path(path: str | Path) -> bool:
    return Path(path).suffix.lower() in FVECS_SUFFIXES


class VectorStore:
    """Load and save point matrices in vecbin or fvecs form."""

    def __init__(self, files: FileService | None = None) -> None:
        self.files = files or FileService()

    def save(self, points: FloatArray, path: str | Path) -> Path:
        """fvecs when the suffix says so, vecbin otherwise."""
        data = encode_fvecs(points) if is_fvecs_path(path) else encode_vecbin(points)
        return self.files.write_bytes(data, path)

    def load(self, path: str | Path) -> FloatArray:
        """Sniff the vecbin magic; anything else is read as fvecs."""
        data = self.files.read_bytes(path)
        if data[: len(VECBIN_MAGIC)] == VECBIN_MAGIC:
            points = decode_vecbin(data, str(path))
        else:
            points = decode_fvecs(data, str(path))
        logger.info("Loaded %d vectors of dimension %d from %s", points.shape[0], points.shape[1], path)
        return points

    def load_dataset(self, path: str | Path) -> Dataset:
        return Dataset(points=self.load(path))
