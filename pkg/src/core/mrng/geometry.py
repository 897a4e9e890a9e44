"""
Euclidean primitives and the conflict-filter threshold family.

Every distance in the package goes through `distances_from` or `distance`, which share one
float64 kernel, so the builder, the searches and the checkers compare bit-identical values.
Lune membership and all "closer" comparisons use strict inequalities (open balls).
"""

import logging
import math
from typing import Any

import numpy as np
import numpy.typing as npt

from src.core.config import get_settings
from src.core.constants import (
    ERR_DEGENERATE_RAY,
    ERR_DIMENSION_MISMATCH,
    ERR_LUNE_UNDEFINED,
    ERR_POSITIVE,
    ERR_THETA_RANGE,
)
from src.core.exceptions import DegenerateGeometryError, DimensionMismatchError, ValidationError
from src.domain_models.dataset import Dataset, Point, as_point

logger = logging.getLogger(__name__)

FloatArray = npt.NDArray[np.float64]

PI_3 = math.pi / 3.0
TWO_PI_3 = 2.0 * math.pi / 3.0
FIVE_PI_6 = 5.0 * math.pi / 6.0


def _norm_rows(diff: FloatArray) -> FloatArray:
    return np.sqrt(np.sum(diff * diff, axis=-1))  # type: ignore[no-any-return]


def _coerce_pair(a: Any, b: Any) -> tuple[Point, Point]:
    pa, pb = as_point(a), as_point(b)
    if pa.shape != pb.shape:
        raise DimensionMismatchError(ERR_DIMENSION_MISMATCH.format(a=pa.size, b=pb.size))
    return pa, pb


def distance(a: Any, b: Any) -> float:
    """l2 distance in float64."""
    pa, pb = _coerce_pair(a, b)
    return float(_norm_rows(pa - pb))


def distances_from(points: FloatArray, x: FloatArray) -> FloatArray:
    """Distances from `x` to every row of `points` (or to every row of a 3-D stack)."""
    return _norm_rows(points - x)


def distance_matrix(a: FloatArray, b: FloatArray) -> FloatArray:
    """|a| x |b| distance matrix built with the same kernel as `distances_from`."""
    return _norm_rows(a[:, None, :] - b[None, :, :])


def in_lune(x: Any, y: Any, z: Any) -> bool:
    """True iff z lies in the open lune of x and y."""
    px, py = _coerce_pair(x, y)
    _, pz = _coerce_pair(x, z)
    dxy = float(_norm_rows(px - py))
    if dxy == 0.0:
        raise DegenerateGeometryError(ERR_LUNE_UNDEFINED)
    return float(_norm_rows(px - pz)) < dxy and float(_norm_rows(py - pz)) < dxy


def angle_at(v: Any, q: Any, u: Any) -> float:
    """Unsigned angle between rays v->q and v->u, in [0, pi]."""
    pv, pq = _coerce_pair(v, q)
    _, pu = _coerce_pair(v, u)
    a, b = pq - pv, pu - pv
    na, nb = float(_norm_rows(a)), float(_norm_rows(b))
    if na == 0.0 or nb == 0.0:
        raise DegenerateGeometryError(ERR_DEGENERATE_RAY)
    cos = float(np.dot(a, b)) / (na * nb)
    return math.acos(min(1.0, max(-1.0, cos)))


def angles_at(v: FloatArray, q: FloatArray, us: FloatArray) -> FloatArray:
    """Vectorised `angle_at` for a batch of ray endpoints `us` (rows); callers ensure non-degeneracy."""
    a = q - v
    b = us - v
    cos = (b @ a) / (_norm_rows(b) * float(_norm_rows(a)))
    return np.arccos(np.clip(cos, -1.0, 1.0))  # type: ignore[no-any-return]


def _check_theta(theta: float) -> float:
    t = float(theta)
    if not (0.0 <= t <= math.pi):
        raise ValidationError(ERR_THETA_RANGE.format(theta=theta))
    return t


def f_theta(theta: float) -> float:
    """Largest d (in units of r) such that an edge of length d may shield a node closer to q."""
    t = _check_theta(theta)
    if t <= PI_3:
        return 2.0
    if t <= TWO_PI_3:
        return 2.0 * math.cos(t - PI_3)
    return 2.0 * (math.cos(t) + 1.0)


def f_theta_array(thetas: FloatArray) -> FloatArray:
    """Vectorised `f_theta`; inputs are assumed to lie in [0, pi]."""
    t = np.asarray(thetas, dtype=np.float64)
    return np.select(  # type: ignore[no-any-return]
        [t <= PI_3, t <= TWO_PI_3],
        [np.full_like(t, 2.0), 2.0 * np.cos(t - PI_3)],
        default=2.0 * (np.cos(t) + 1.0),
    )


def g_theta(theta: float) -> float | None:
    """None on (5pi/6, pi]."""
    t = _check_theta(theta)
    if t <= PI_3:
        return 2.0
    if t <= FIVE_PI_6:
        return 2.0 * math.cos(t - PI_3)
    return None


def h_theta(theta: float) -> float:
    t = _check_theta(theta)
    if t <= TWO_PI_3:
        return 2.0 * math.cos(t - PI_3)
    return 2.0 * (math.cos(t) + 1.0)


def s_theta(theta: float) -> float:
    t = _check_theta(theta)
    if t <= TWO_PI_3:
        return math.cos(t - TWO_PI_3)
    return 1.0


def s_theta_supremum(theta: float, step: float | None = None) -> float:
    """
    Grid maximum of cos(theta + 2a) over a in [-pi, -pi/3] U [pi/3, pi] with cos(theta + a) >= 0.

    Independent numeric counterpart of `s_theta`. The grid step defaults to SUPREMUM_STEP.
    """
    t = _check_theta(theta)
    if step is None:
        step = get_settings().geometry.supremum_step
    if step <= 0.0:
        raise ValidationError(ERR_POSITIVE.format(name="step", value=step))
    count = int(math.ceil((TWO_PI_3) / step)) + 1
    right = np.linspace(PI_3, math.pi, count)
    alphas = np.concatenate((-right[::-1], right))
    feasible = alphas[np.cos(t + alphas) >= 0.0]
    if feasible.size == 0:
        msg = f"No feasible angle on the grid for theta={theta}."
        raise ValidationError(msg)
    return float(np.max(np.cos(t + 2.0 * feasible)))


def philox_generator(seed: int, stream: int) -> np.random.Generator:
    if not (0 <= seed < 2**64):
        msg = f"Seed {seed} is not a 64-bit unsigned integer."
        raise ValidationError(msg)
    if stream == 0:
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream])))


def generate_uniform_dataset(n: int, d: int, seed: int) -> Dataset:
    """
    n i.i.d. points uniform in [0, 1)^d.

    The stream is numpy's counter-based Philox bit generator keyed by `seed`, which is
    reproducible across platforms and numpy versions that keep the Philox4x64 contract.
    Coordinates are drawn as float32 so that the float32 vector files round-trip exactly.
    """
    for name, value in (("n", n), ("d", d)):
        if value < 1:
            raise ValidationError(ERR_POSITIVE.format(name=name, value=value))
    points = philox_generator(seed, 0).random((n, d), dtype=np.float32).astype(np.float64)
    logger.debug("Generated uniform dataset n=%d d=%d seed=%d", n, d, seed)
    return Dataset(points=points)


def generate_uniform_queries(count: int, d: int, seed: int) -> FloatArray:
    """Uniform queries in [0, 1)^d from a stream independent of the dataset stream for `seed`."""
    for name, value in (("count", count), ("d", d)):
        if value < 1:
            raise ValidationError(ERR_POSITIVE.format(name=name, value=value))
    return philox_generator(seed, 1).random((count, d), dtype=np.float32).astype(np.float64)
