"""
Dataset domain model.

A Dataset is an immutable (n, d) float64 matrix whose row index is the stable node id.
Ingest enforces finiteness and pairwise-distinct rows, and fixes a 64-bit checksum that
graphs and conflict maps embed to guard against being paired with the wrong data.
"""

import hashlib
from typing import Any, Self

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator

from src.core.constants import ERR_DUPLICATE_POINTS, ERR_EMPTY_DATASET, ERR_NON_FINITE
from src.core.exceptions import DuplicatePointsError, ValidationError

Point = npt.NDArray[np.float64]


def as_point(coords: Any) -> Point:
    """Coerce a coordinate sequence into a finite 1-D float64 array."""
    p = np.ascontiguousarray(coords, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValidationError(ERR_EMPTY_DATASET)
    if not np.all(np.isfinite(p)):
        raise ValidationError(ERR_NON_FINITE)
    return p


def dataset_checksum(points: npt.NDArray[np.float64]) -> int:
    """64-bit BLAKE2b digest over shape and little-endian float64 coordinates."""
    h = hashlib.blake2b(digest_size=8)
    n, d = points.shape
    h.update(np.array([n, d], dtype="<u8").tobytes())
    h.update(np.ascontiguousarray(points, dtype="<f8").tobytes())
    return int.from_bytes(h.digest(), "little")


class Dataset(BaseModel):
    """n points in d-dimensional Euclidean space with dense ids 0..n-1."""

    model_config = ConfigDict(extra="forbid", arbitrary_types_allowed=True)

    points: np.ndarray

    _checksum: int = PrivateAttr(default=0)

    @field_validator("points", mode="before")
    @classmethod
    def coerce_points(cls, v: Any) -> np.ndarray:
        arr = np.array(v, dtype=np.float64, order="C", copy=True)
        if arr.ndim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(ERR_EMPTY_DATASET)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(ERR_NON_FINITE)
        arr.setflags(write=False)
        return arr

    @model_validator(mode="after")
    def validate_distinct(self) -> Self:
        """Reject identical rows; report the lowest-id duplicate pair."""
        pts = self.points
        if pts.shape[0] > 1:
            order = np.lexsort(pts.T[::-1])
            ordered = pts[order]
            same = np.all(ordered[1:] == ordered[:-1], axis=1)
            if np.any(same):
                hits = np.flatnonzero(same)
                pairs = sorted(
                    tuple(sorted((int(order[i]), int(order[i + 1])))) for i in hits
                )
                a, b = pairs[0]
                raise DuplicatePointsError(ERR_DUPLICATE_POINTS.format(a=a, b=b))
        self._checksum = dataset_checksum(pts)
        return self

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def dim(self) -> int:
        return int(self.points.shape[1])

    @property
    def checksum(self) -> int:
        return self._checksum

    def point(self, node: int) -> Point:
        return self.points[node]  # type: ignore[no-any-return]

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.checksum == other.checksum and np.array_equal(self.points, other.points)

    __hash__ = None  # type: ignore[assignment]
