"""Line-of-sight relation and per-sensor visibility height fields.

A point is visible from a sensor iff the whole straight segment between
them stays strictly inside free space.  For heightfield environments the
visible set above each horizontal cell is an interval of altitudes, so a
sensor's entire viewshed is captured by one scalar field: the minimal
visible altitude per cell (``z_ceil`` when nothing below the ceiling is
visible).
"""

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .env import Environment, Point3, is_free
from .errors import DomainError


@dataclass
class VisibilityField:
    """Minimal visible altitude per cell, as seen from ``origin``.

    Altitudes strictly above ``values[i, j]`` (and at most z_ceil) are
    visible at the center of cell (i, j); altitudes at or below are not.
    """

    origin: Point3
    values: np.ndarray


def sight_clearance(env: Environment, a: Point3, b: Point3) -> float:
    """Minimum terrain clearance along a->b; > 0 means unobstructed."""
    if not is_free(env, a):
        raise DomainError(f"segment start {a} is not in free space")
    if not is_free(env, b):
        raise DomainError(f"segment end {b} is not in free space")
    cs = env.cell_size
    return float(
        kernels.los_clearance(
            env.heights, a.x / cs, a.y / cs, a.z, b.x / cs, b.y / cs, b.z
        )
    )


def line_of_sight(env: Environment, a: Point3, b: Point3) -> bool:
    """True iff every point of the segment a->b lies in free space.

    Grazing contact with an obstacle top counts as blocked (free space is
    open above the terrain).
    """
    return sight_clearance(env, a, b) > 0.0


def visibility_field(env: Environment, sensor: Point3, method: str = "sweep") -> VisibilityField:
    """Visibility field of one sensor.

    ``method="oracle"`` walks sensor->cell for every cell (exact, O(M^3));
    ``method="sweep"`` is the O(M^2) radial sweep, accurate to a couple of
    percent of z_ceil against the oracle.
    """
    if not is_free(env, sensor):
        raise DomainError(f"sensor {sensor} is not in free space")
    cs = env.cell_size
    if method == "oracle":
        vals = kernels.field_oracle(env.heights, sensor.x / cs, sensor.y / cs, sensor.z, env.z_ceil)
    elif method == "sweep":
        vals = kernels.field_sweep(env.heights, sensor.x / cs, sensor.y / cs, sensor.z, env.z_ceil)
    else:
        raise ValueError(f"unknown visibility method {method!r}")
    return VisibilityField(origin=sensor, values=vals)


def order_of_visibility(env: Environment, sensors: Iterable[Point3] | Sequence[Point3], y: Point3) -> int:
    """Number of sensors with unobstructed sight of y (duplicates count)."""
    if not is_free(env, y):
        raise DomainError(f"query point {y} is not in free space")
    count = 0
    for s in sensors:
        if line_of_sight(env, s, y):
            count += 1
    return count


def traversed_cells(env: Environment, a: Point3, b: Point3):
    """Cells crossed by the horizontal projection of a->b, with parameter intervals.

    Diagnostic helper mirroring exactly what the clearance kernel walks;
    returns (t0, t1, ci, cj) arrays of equal length.
    """
    H, W = env.shape
    cs = env.cell_size
    cap = H + W + 4
    t0 = np.empty(cap)
    t1 = np.empty(cap)
    ci = np.empty(cap, np.int64)
    cj = np.empty(cap, np.int64)
    n = kernels.traverse(H, W, a.x / cs, a.y / cs, b.x / cs, b.y / cs, t0, t1, ci, cj)
    return t0[:n], t1[:n], ci[:n], cj[:n]
