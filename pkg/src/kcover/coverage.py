"""Cumulative visibility statistics and the order-capped coverage volume.

For placed sensors with visibility fields g_1..g_n, layer l of the
cumulative statistic holds the l-th smallest field value per cell.  A point
at altitude z above a cell has visibility order >= l exactly when z is
strictly above layer l, which turns the order-capped coverage integral into
a closed-form column sum.
"""

from dataclasses import dataclass

import numpy as np

from .env import Environment, free_volume
from .errors import DomainError
from .visibility import VisibilityField


@dataclass
class CumulativeVisibility:
    """k stacked per-cell order statistics of all placed sensors' fields.

    ``layers[l]`` is the (l+1)-th smallest minimal-visible-altitude value;
    cells where fewer than l+1 sensors see below the ceiling hold the
    sentinel z_ceil.  Layers are nondecreasing in l at every cell.
    """

    k: int
    z_ceil: float
    layers: np.ndarray
    n_sensors: int = 0

    @classmethod
    def empty(cls, env: Environment, k: int) -> "CumulativeVisibility":
        if k < 1:
            raise DomainError(f"target order must be >= 1, got {k}")
        H, W = env.shape
        return cls(k=k, z_ceil=env.z_ceil, layers=np.full((k, H, W), env.z_ceil), n_sensors=0)


def update_cumvis(C: CumulativeVisibility, field: VisibilityField | np.ndarray) -> CumulativeVisibility:
    """Fold one more sensor's field into the k smallest per-cell values."""
    g = field.values if isinstance(field, VisibilityField) else np.asarray(field)
    if g.shape != C.layers.shape[1:]:
        raise DomainError(f"field shape {g.shape} does not match grid {C.layers.shape[1:]}")
    stacked = np.concatenate([C.layers, g[None, :, :]], axis=0)
    new_layers = np.sort(stacked, axis=0)[: C.k]
    return CumulativeVisibility(
        k=C.k, z_ceil=C.z_ceil, layers=np.ascontiguousarray(new_layers), n_sensors=C.n_sensors + 1
    )


def psi_k(env: Environment, C: CumulativeVisibility) -> float:
    """Coverage volume counted with multiplicity capped at k.

    Per cell and layer l, the altitudes covered at order >= l form the
    column (layers[l], z_ceil], so the integral collapses to
    sum_l sum_cells (z_ceil - max(layer, terrain))+ * cell_area.
    """
    area = env.cell_size * env.cell_size
    h = env.heights[None, :, :]
    col = np.maximum(env.z_ceil - np.maximum(C.layers, h), 0.0)
    return float(np.sum(col)) * area


def k_covered_volume(env: Environment, C: CumulativeVisibility) -> float:
    """Volume of points observed by at least k sensors."""
    area = env.cell_size * env.cell_size
    col = np.maximum(env.z_ceil - np.maximum(C.layers[C.k - 1], env.heights), 0.0)
    return float(np.sum(col)) * area


def coverage_fraction(env: Environment, C: CumulativeVisibility) -> float:
    """psi_k as a fraction of its ceiling k * free_volume."""
    V = free_volume(env)
    if V == 0.0:
        return 1.0
    return psi_k(env, C) / (C.k * V)


def order_counts_at(C: CumulativeVisibility, z: float) -> np.ndarray:
    """Per-cell count of layers strictly below altitude z (capped order)."""
    return np.sum(C.layers < z, axis=0).astype(np.int64)


def normalized_channels(env: Environment, C: CumulativeVisibility):
    """Terrain and cumulative layers scaled to [0, 1] float32 (sentinel -> 1)."""
    obs = (env.heights / env.z_ceil).astype(np.float32)
    cum = (np.clip(C.layers, 0.0, env.z_ceil) / env.z_ceil).astype(np.float32)
    return obs, cum
