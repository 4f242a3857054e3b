"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's traversal code: line of
sight is checked by dense point sampling along the segment, volumes by
voxel quadrature.  Tests freeze expected values computed with these.
"""

import math

import numpy as np
import pytest

from kcover import kernels
from kcover.datagen import flood_fill_heights, random_building_mask
from kcover.env import Environment, HeightField, Point3


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    kernels.warmup()


def flat_env(size=8, **kw) -> Environment:
    return Environment(terrain=HeightField(np.zeros((size, size))), **kw)


def urban_env(seed, size=32, density=0.25, **kw) -> Environment:
    rng = np.random.default_rng(seed)
    mask = random_building_mask(rng, size, density=density)
    terrain = flood_fill_heights(mask, rng)
    return Environment(terrain=terrain, **kw)


def sample_free_point(env: Environment, rng: np.random.Generator) -> Point3:
    H, W = env.shape
    cs = env.cell_size
    while True:
        i = int(rng.integers(H))
        j = int(rng.integers(W))
        f = float(env.heights[i, j])
        if f >= env.z_ceil:
            continue
        z = f + (env.z_ceil - f) * (1.0 - rng.random())
        if z <= f:
            continue
        x = (j + rng.random()) * cs
        y = (i + rng.random()) * cs
        return Point3(x, y, z)


def sampled_los(env: Environment, a: Point3, b: Point3, steps_per_cell: int = 64) -> bool:
    """Independent line-of-sight oracle: dense sampling along the segment."""
    cs = env.cell_size
    H, W = env.shape
    ax, ay = a.x / cs, a.y / cs
    bx, by = b.x / cs, b.y / cs
    length = math.hypot(bx - ax, by - ay)
    n = max(2, int(math.ceil(length * steps_per_cell)) + 1)
    lam = np.linspace(0.0, 1.0, n)
    xs = ax + (bx - ax) * lam
    ys = ay + (by - ay) * lam
    zs = a.z + (b.z - a.z) * lam
    jj = np.clip(np.floor(xs).astype(np.int64), 0, W - 1)
    ii = np.clip(np.floor(ys).astype(np.int64), 0, H - 1)
    return bool(np.all(env.heights[ii, jj] < zs))


def voxel_order_integral(env: Environment, field_values: list[np.ndarray], k: int, nz: int = 512):
    """Voxel quadrature of (capped order, order>=k indicator) over free space."""
    z = (np.arange(nz) + 0.5) * env.z_ceil / nz
    F = np.stack(field_values)
    order = np.sum(F[:, None, :, :] < z[None, :, None, None], axis=0)
    free = env.heights[None, :, :] < z[:, None, None]
    voxel = env.cell_size * env.cell_size * env.z_ceil / nz
    psi = float(np.sum(np.minimum(order, k) * free)) * voxel
    kcov = float(np.sum((order >= k) & free)) * voxel
    return psi, kcov


def slab_free_volume(env: Environment, nz: int = 1024) -> float:
    """Free volume by exact per-slab clipping (independent quadrature)."""
    edges = np.linspace(0.0, env.z_ceil, nz + 1)
    h = env.heights
    total = 0.0
    for s in range(nz):
        total += float(np.sum(np.maximum(edges[s + 1] - np.maximum(edges[s], h), 0.0)))
    return total * env.cell_size * env.cell_size
