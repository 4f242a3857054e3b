"""Image rendering of visibility-order slices and placement overlays.

Images use a discrete k+2 color palette (orders 0..k plus a distinct
obstacle color) so order classes stay unambiguous, and are plain Pillow
output: the same inputs always produce byte-identical files.
"""

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .coverage import CumulativeVisibility
from .env import Environment
from .errors import DomainError
from .planner import SensorSet

OBSTACLE = -1
SENSOR_COLOR = (220, 40, 40)
OBSTACLE_COLOR = (45, 45, 45)


PALETTE_ENDPOINTS = {
    "default": ((232, 236, 240), (25, 80, 180)),
    "warm": ((245, 238, 230), (190, 60, 20)),
}


def order_palette(k: int, name: str = "default") -> list[tuple[int, int, int]]:
    """Discrete colors for orders 0..k, fading light-to-saturated."""
    if name not in PALETTE_ENDPOINTS:
        raise DomainError(f"unknown colormap {name!r}; have {sorted(PALETTE_ENDPOINTS)}")
    lo, hi = PALETTE_ENDPOINTS[name]
    colors = []
    for order in range(k + 1):
        t = order / max(k, 1)
        colors.append(tuple(int(round(a + t * (b - a))) for a, b in zip(lo, hi)))
    return colors


@dataclass
class SliceSpec:
    axis: str = "horizontal"  # "horizontal" | "vertical-row" | "vertical-col"
    coord: float = 0.5  # altitude for horizontal, row/col index for vertical
    colormap: str = "default"
    scale: int = 8
    show_sensors: bool = False
    contour: bool = False  # outline building footprints (horizontal only)
    n_altitude: int | None = None  # vertical pixel rows; defaults to grid size


def _classes_horizontal(env: Environment, C: CumulativeVisibility, z: float) -> np.ndarray:
    if not (0.0 <= z <= env.z_ceil):
        raise DomainError(f"slice altitude {z} outside [0, {env.z_ceil}]")
    order = np.sum(C.layers < z, axis=0)
    return np.where(env.heights < z, order, OBSTACLE)


def _classes_vertical(env: Environment, C: CumulativeVisibility, axis: str, index: int, nz: int) -> np.ndarray:
    H, W = env.shape
    limit = H if axis == "vertical-row" else W
    if not (0 <= index < limit):
        raise DomainError(f"slice index {index} outside [0, {limit})")
    if axis == "vertical-row":
        heights = env.heights[index, :]
        layers = C.layers[:, index, :]
    else:
        heights = env.heights[:, index]
        layers = C.layers[:, :, index]
    n_along = heights.shape[0]
    out = np.empty((nz, n_along), dtype=np.int64)
    for r in range(nz):
        # pixel row 0 sits just under the ceiling, last row just above the floor
        z = env.z_ceil * (nz - r - 0.5) / nz
        order = np.sum(layers < z, axis=0)
        out[r] = np.where(heights < z, order, OBSTACLE)
    return out


def _paint(classes: np.ndarray, k: int, scale: int, colormap: str = "default") -> Image.Image:
    palette = order_palette(k, colormap)
    h, w = classes.shape
    rgb = np.empty((h, w, 3), dtype=np.uint8)
    rgb[:, :] = OBSTACLE_COLOR
    for order in range(k + 1):
        rgb[classes == order] = palette[order]
    img = Image.fromarray(rgb, mode="RGB")
    if scale > 1:
        img = img.resize((w * scale, h * scale), Image.NEAREST)
    return img


def _draw_contour(img: Image.Image, env: Environment, scale: int) -> None:
    """Outline cells where terrain rises above ground level."""
    built = env.heights > 0.0
    edge = built & ~(
        np.roll(built, 1, 0) & np.roll(built, -1, 0) & np.roll(built, 1, 1) & np.roll(built, -1, 1)
    )
    px = np.array(img)
    for i, j in np.argwhere(edge):
        px[i * scale : (i + 1) * scale, j * scale : (j + 1) * scale] = (10, 10, 10)
    img.paste(Image.fromarray(px))


def _draw_sensors(img: Image.Image, sensors: SensorSet, env: Environment, scale: int) -> None:
    px = np.array(img)
    H, W = px.shape[:2]
    cs = env.cell_size
    half = max(1, scale // 3)
    for p in sensors.points:
        cx = int(p.x / cs * scale)
        cy = int(p.y / cs * scale)
        y0, y1 = max(0, cy - half), min(H, cy + half + 1)
        x0, x1 = max(0, cx - half), min(W, cx + half + 1)
        px[y0:y1, x0:x1] = SENSOR_COLOR
    img.paste(Image.fromarray(px))


def render_order_slice(
    env: Environment,
    C: CumulativeVisibility,
    spec: SliceSpec,
    sensors: SensorSet | None = None,
) -> Image.Image:
    """Render one slice of the visibility-order field.

    Horizontal slices show, per cell, how many placed sensors see the point
    at the slice altitude (obstacle cells get their own color); vertical
    slices sample altitudes down a row or column.
    """
    if spec.axis == "horizontal":
        classes = _classes_horizontal(env, C, float(spec.coord))
    elif spec.axis in ("vertical-row", "vertical-col"):
        nz = spec.n_altitude or max(env.shape)
        classes = _classes_vertical(env, C, spec.axis, int(spec.coord), nz)
    else:
        raise DomainError(f"unknown slice axis {spec.axis!r}")
    img = _paint(classes, C.k, spec.scale, spec.colormap)
    if spec.contour and spec.axis == "horizontal":
        _draw_contour(img, env, spec.scale)
    if spec.show_sensors and sensors is not None and spec.axis == "horizontal":
        _draw_sensors(img, sensors, env, spec.scale)
    return img


def render_placement(
    env: Environment,
    sensors: SensorSet,
    C: CumulativeVisibility,
    z_ref: float | None = None,
    scale: int = 8,
) -> Image.Image:
    """Top-down capped-order view at a reference altitude with sensor markers."""
    z = 0.5 * env.z_ceil if z_ref is None else z_ref
    spec = SliceSpec(axis="horizontal", coord=z, scale=scale, show_sensors=True)
    return render_order_slice(env, C, spec, sensors=sensors)
