"""Heightfield environments: terrain grids, free space, candidate sensor sites.

The environment is a 2.5D heightfield: terrain height is piecewise constant
per cell (flat-topped prisms), free space is everything strictly above the
terrain and at or below the ceiling plane ``z_ceil``.  Sensors mount at cell
centers, ``sensor_height`` above the local terrain, and only on cells whose
terrain does not exceed ``ground_threshold``.
"""

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise DomainError(f"non-finite point ({self.x}, {self.y}, {self.z})")


@dataclass
class HeightField:
    """Row-major grid of terrain heights; cell (i, j) covers [j,j+1)x[i,i+1) cell units."""

    values: np.ndarray
    cell_size: float = 1.0

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 2:
            raise ConfigError(f"terrain must be 2D, got shape {v.shape}")
        if v.shape[0] < 2 or v.shape[1] < 2:
            raise ConfigError(f"grid must be at least 2x2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("terrain contains non-finite values")
        if np.any(v < 0.0):
            raise ConfigError("terrain heights must be >= 0")
        if self.cell_size <= 0.0:
            raise ConfigError(f"cell_size must be positive, got {self.cell_size}")
        self.values = v

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass
class Environment:
    terrain: HeightField
    z_ceil: float = 1.0
    sensor_height: float = 0.02
    ground_threshold: float = 0.0

    def __post_init__(self):
        if self.z_ceil <= 0.0:
            raise ConfigError(f"z_ceil must be positive, got {self.z_ceil}")
        if self.sensor_height <= 0.0:
            raise ConfigError(f"sensor_height must be positive, got {self.sensor_height}")
        if float(self.terrain.values.max()) > self.z_ceil:
            raise ConfigError("terrain exceeds the ceiling altitude")

    @property
    def heights(self) -> np.ndarray:
        return self.terrain.values

    @property
    def shape(self) -> tuple[int, int]:
        return self.terrain.values.shape

    @property
    def cell_size(self) -> float:
        return self.terrain.cell_size

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        """Cell containing the horizontal point (x, y) in length units."""
        cs = self.cell_size
        H, W = self.shape
        cx = x / cs
        cy = y / cs
        if not (0.0 <= cx < W and 0.0 <= cy < H):
            raise DomainError(f"point ({x}, {y}) outside the {H}x{W} grid")
        return int(math.floor(cy)), int(math.floor(cx))

    def cell_center(self, cell: tuple[int, int]) -> tuple[float, float]:
        i, j = cell
        cs = self.cell_size
        return (j + 0.5) * cs, (i + 0.5) * cs


def is_free(env: Environment, p: Point3) -> bool:
    """True iff p lies strictly above the terrain (and below the ceiling).

    Terrain tops belong to the obstacle set, so equality is not free.
    """
    i, j = env.cell_of(p.x, p.y)
    if not (0.0 <= p.z <= env.z_ceil):
        raise DomainError(f"altitude {p.z} outside [0, {env.z_ceil}]")
    return bool(env.heights[i, j] < p.z)


def free_volume(env: Environment) -> float:
    """Total free-space volume; exact for piecewise-constant terrain."""
    area = env.cell_size * env.cell_size
    return float(np.sum(env.z_ceil - env.heights)) * area


def candidate_cells(env: Environment) -> np.ndarray:
    """All legal sensor cells as an (n, 2) array of (row, col) indices.

    A cell qualifies when its terrain is at or below ground_threshold and
    the mounted sensor still sits under the ceiling.
    """
    h = env.heights
    mask = (h <= env.ground_threshold) & (h + env.sensor_height < env.z_ceil)
    idx = np.argwhere(mask)
    if idx.shape[0] == 0:
        raise ConfigError("no candidate sensor cells (everything is built up)")
    return idx


def candidate_mask(env: Environment) -> np.ndarray:
    h = env.heights
    return (h <= env.ground_threshold) & (h + env.sensor_height < env.z_ceil)


def sensor_position(env: Environment, cell: tuple[int, int]) -> Point3:
    """Mounted sensor position at a cell: center, sensor_height above terrain."""
    i, j = int(cell[0]), int(cell[1])
    H, W = env.shape
    if not (0 <= i < H and 0 <= j < W):
        raise DomainError(f"cell {cell} outside the {H}x{W} grid")
    x, y = env.cell_center((i, j))
    return Point3(x, y, float(env.heights[i, j]) + env.sensor_height)


def load_heightmap_png(path, cell_size: float = 1.0, z_ceil: float = 1.0) -> HeightField:
    """Read a 16-bit grayscale PNG as terrain; pixel/65535 scales to z_ceil."""
    img = Image.open(path)
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        raise ConfigError(f"{path} is 8-bit; heightmaps must be 16-bit grayscale")
    arr = arr.astype(np.float64) / 65535.0 * z_ceil
    return HeightField(arr, cell_size=cell_size)


def save_heightmap_png(field: HeightField, path, z_ceil: float = 1.0) -> None:
    arr = np.clip(field.values / z_ceil, 0.0, 1.0)
    img = Image.fromarray(np.round(arr * 65535.0).astype(np.uint16))
    img.save(path)


def load_mask_png(path) -> np.ndarray:
    """Read an 8-bit PNG footprint mask; nonzero pixels are building."""
    img = Image.open(path).convert("L")
    return (np.asarray(img) != 0).astype(np.uint8)


def save_mask_png(mask: np.ndarray, path) -> None:
    img = Image.fromarray(np.where(np.asarray(mask) != 0, 255, 0).astype(np.uint8))
    img.save(path)
