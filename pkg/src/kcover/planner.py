"""Gain functions and the greedy / epsilon-greedy / random placement loops.

Each step evaluates, for every candidate cell, how much order-capped
coverage volume a sensor there would add.  The default "weighted" gain
multiplies that by the distance to the nearest placed sensor, which is what
keeps consecutive picks apart; the plain "naive" gain is kept both as a
building block and to demonstrate why it co-locates sensors when the target
order has not been reached anywhere yet.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coverage import CumulativeVisibility, k_covered_volume, psi_k, update_cumvis
from .env import (
    Environment,
    Point3,
    candidate_cells,
    candidate_mask,
    free_volume,
    sensor_position,
)
from .errors import ConfigError, DomainError
from .visibility import visibility_field


@dataclass
class SensorSet:
    """Placed sensors in placement order."""

    cells: list[tuple[int, int]] = field(default_factory=list)
    points: list[Point3] = field(default_factory=list)

    def append(self, cell: tuple[int, int], point: Point3) -> None:
        self.cells.append((int(cell[0]), int(cell[1])))
        self.points.append(point)

    def __len__(self) -> int:
        return len(self.cells)


@dataclass
class GainMap:
    """Per-cell gain values; non-candidate cells are NaN and masked invalid."""

    values: np.ndarray
    valid: np.ndarray

    def max_gain(self) -> float:
        vals = self.values[self.valid]
        if vals.size == 0:
            raise DomainError("gain map has no valid cells")
        return float(np.max(vals))

    def argmax_cell(self) -> tuple[int, int]:
        masked = np.where(self.valid, self.values, -np.inf)
        flat = int(np.argmax(masked))
        return flat // self.values.shape[1], flat % self.values.shape[1]


@dataclass
class PlannerConfig:
    k: int = 2
    delta: float = 0.95
    epsilon: float = 0.0
    p: float = 2.0
    seed: int = 0
    first_sensor: tuple[int, int] | str = (0, 0)
    gain: str = "weighted"
    provider: str = "exact"
    step_cap: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError(f"target order k must be >= 1, got {self.k}")
        if not (0.0 < self.delta < 1.0):
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if not (0.0 <= self.epsilon < 1.0):
            raise ConfigError(f"epsilon must lie in [0, 1), got {self.epsilon}")
        if self.p < 1.0:
            raise ConfigError(f"norm exponent p must be >= 1, got {self.p}")
        if self.gain not in ("weighted", "naive"):
            raise ConfigError(f"gain must be 'weighted' or 'naive', got {self.gain!r}")


@dataclass
class StepRecord:
    index: int
    cell: tuple[int, int]
    psi: float
    k_covered: float
    max_gain: float | None
    gain_map: GainMap | None = None
    layers_before: np.ndarray | None = None


@dataclass
class PlacementResult:
    sensors: SensorSet
    steps: list[StepRecord]
    status: str  # "reached" | "stall" | "budget"
    free_vol: float
    threshold: float
    k: int

    @property
    def psi(self) -> float:
        return self.steps[-1].psi if self.steps else 0.0

    @property
    def k_covered(self) -> float:
        return self.steps[-1].k_covered if self.steps else 0.0


def _check_candidate(env: Environment, cell) -> tuple[int, int]:
    i, j = int(cell[0]), int(cell[1])
    H, W = env.shape
    if not (0 <= i < H and 0 <= j < W):
        raise DomainError(f"cell {cell} outside the {H}x{W} grid")
    if not candidate_mask(env)[i, j]:
        raise DomainError(f"cell {cell} is not a legal sensor site")
    return i, j


def _kernel_args(env: Environment, C: CumulativeVisibility, P: SensorSet):
    heights = env.heights
    ck = np.ascontiguousarray(C.layers[C.k - 1])
    si = np.array([c[0] for c in P.cells], dtype=np.int64)
    sj = np.array([c[1] for c in P.cells], dtype=np.int64)
    return heights, ck, si, sj


def gain_naive(env: Environment, C: CumulativeVisibility, P: SensorSet, cell) -> float:
    """Coverage-volume increase from a sensor at ``cell``; always >= 0."""
    i, j = _check_candidate(env, cell)
    heights, ck, si, sj = _kernel_args(env, C, P)
    vals = kernels.gain_values(
        heights,
        ck,
        np.array([i], np.int64),
        np.array([j], np.int64),
        si,
        sj,
        env.sensor_height,
        env.z_ceil,
        env.cell_size,
        2.0,
        False,
    )
    return float(vals[0])


def gain(env: Environment, C: CumulativeVisibility, P: SensorSet, cell, p: float = 2.0) -> float:
    """Distance-weighted gain: nearest-placed-sensor l_p distance times gain_naive."""
    if len(P) == 0:
        raise ConfigError(
            "distance-weighted gain is undefined with no placed sensors; "
            "place the first sensor via the planner's first_sensor handling"
        )
    i, j = _check_candidate(env, cell)
    heights, ck, si, sj = _kernel_args(env, C, P)
    vals = kernels.gain_values(
        heights,
        ck,
        np.array([i], np.int64),
        np.array([j], np.int64),
        si,
        sj,
        env.sensor_height,
        env.z_ceil,
        env.cell_size,
        float(p),
        True,
    )
    return float(vals[0])


# Candidate visibility fields depend only on the terrain, so placement runs
# precompute and reuse them when they fit in memory.
FIELD_CACHE_LIMIT_BYTES = 1 << 29


class FieldCache:
    """Precomputed sweep fields for every candidate cell of one environment."""

    def __init__(self, env: Environment):
        mask = candidate_mask(env)
        self.cand = np.argwhere(mask)
        self.cand_i = np.ascontiguousarray(self.cand[:, 0])
        self.cand_j = np.ascontiguousarray(self.cand[:, 1])
        self.fields = kernels.candidate_fields(
            env.heights, self.cand_i, self.cand_j, env.sensor_height, env.z_ceil
        )

    @staticmethod
    def size_bytes(env: Environment) -> int:
        n_cand = int(candidate_mask(env).sum())
        H, W = env.shape
        return n_cand * H * W * 8


def gain_map(
    env: Environment,
    C: CumulativeVisibility,
    P: SensorSet,
    gain_kind: str = "weighted",
    p: float = 2.0,
    provider=None,
    field_cache: FieldCache | None = None,
) -> GainMap:
    """Gain at every candidate cell; other cells are NaN/invalid.

    With a provider, one dense prediction is requested and masked; exact
    evaluation runs the gain kernel over all candidates in parallel,
    against cached candidate fields when available (bitwise identical).
    """
    mask = candidate_mask(env)
    if not mask.any():
        raise ConfigError("no candidate sensor cells")
    H, W = env.shape
    if provider is not None:
        dense = provider.predict(env, C)
        values = np.where(mask, np.asarray(dense, dtype=np.float64), np.nan)
        return GainMap(values=values, valid=mask)
    if gain_kind == "weighted" and len(P) == 0:
        raise ConfigError("distance-weighted gain map needs at least one placed sensor")
    heights, ck, si, sj = _kernel_args(env, C, P)
    weighted = gain_kind == "weighted"
    if field_cache is not None:
        vals = kernels.gain_values_cached(
            field_cache.fields,
            heights,
            ck,
            field_cache.cand_i,
            field_cache.cand_j,
            si,
            sj,
            env.z_ceil,
            env.cell_size,
            float(p),
            weighted,
        )
        cand = field_cache.cand
    else:
        cand = np.argwhere(mask)
        vals = kernels.gain_values(
            heights,
            ck,
            np.ascontiguousarray(cand[:, 0]),
            np.ascontiguousarray(cand[:, 1]),
            si,
            sj,
            env.sensor_height,
            env.z_ceil,
            env.cell_size,
            float(p),
            weighted,
        )
    values = np.full((H, W), np.nan)
    values[cand[:, 0], cand[:, 1]] = vals
    return GainMap(values=values, valid=mask)


def select_next(gm: GainMap, epsilon: float, rng: np.random.Generator) -> tuple[int, int]:
    """Uniform draw among cells whose gain reaches (1 - epsilon) of the maximum.

    At epsilon = 0 the pool is the exact argmax set (ties included), so a
    fixed rng makes the whole selection deterministic.
    """
    vals = gm.values[gm.valid]
    if vals.size == 0:
        raise DomainError("gain map has no valid cells")
    top = float(np.max(vals))
    thr = (1.0 - epsilon) * top
    pool = np.argwhere(gm.valid & (gm.values >= thr))
    pick = pool[int(rng.integers(pool.shape[0]))]
    return int(pick[0]), int(pick[1])


def _first_cell(env, cfg, cand, rng) -> tuple[int, int]:
    if isinstance(cfg.first_sensor, str):
        if cfg.first_sensor != "random":
            raise ConfigError(f"first_sensor must be a cell or 'random', got {cfg.first_sensor!r}")
        pick = cand[int(rng.integers(cand.shape[0]))]
        return int(pick[0]), int(pick[1])
    i, j = int(cfg.first_sensor[0]), int(cfg.first_sensor[1])
    if not candidate_mask(env)[i, j]:
        raise ConfigError(f"configured first sensor cell ({i}, {j}) is not a legal site")
    return i, j


def run_placement(
    env: Environment,
    cfg: PlannerConfig,
    provider=None,
    rng: np.random.Generator | None = None,
    record_maps: bool = False,
) -> PlacementResult:
    """Place sensors until the order-capped coverage reaches delta * k * free volume.

    The first sensor of a weighted-gain run comes from cfg.first_sensor
    (fixed cell or uniform random candidate); naive-gain runs score even the
    first sensor from a gain map.  Stops with status "stall" when the best
    gain is not positive while the threshold is unmet, or "budget" at the
    step cap.
    """
    cand = candidate_cells(env)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    V = free_volume(env)
    threshold = cfg.delta * cfg.k * V
    step_cap = cfg.step_cap if cfg.step_cap is not None else 4 * cfg.k * max(env.shape)
    cache = None
    if provider is None and FieldCache.size_bytes(env) <= FIELD_CACHE_LIMIT_BYTES:
        cache = FieldCache(env)

    C = CumulativeVisibility.empty(env, cfg.k)
    sensors = SensorSet()
    steps: list[StepRecord] = []
    status = "reached"
    while True:
        if psi_k(env, C) >= threshold:
            status = "reached"
            break
        if len(sensors) >= step_cap:
            status = "budget"
            break
        gm = None
        max_gain = None
        if cfg.gain == "weighted" and len(sensors) == 0:
            cell = _first_cell(env, cfg, cand, rng)
        else:
            gm = gain_map(
                env, C, sensors, gain_kind=cfg.gain, p=cfg.p, provider=provider,
                field_cache=cache,
            )
            max_gain = gm.max_gain()
            if max_gain <= 0.0:
                status = "stall"
                break
            cell = select_next(gm, cfg.epsilon, rng)
        layers_before = C.layers.copy() if record_maps else None
        pos = sensor_position(env, cell)
        fld = visibility_field(env, pos, method="sweep")
        C = update_cumvis(C, fld)
        sensors.append(cell, pos)
        steps.append(
            StepRecord(
                index=len(sensors),
                cell=cell,
                psi=psi_k(env, C),
                k_covered=k_covered_volume(env, C),
                max_gain=max_gain,
                gain_map=gm if record_maps else None,
                layers_before=layers_before,
            )
        )
    return PlacementResult(
        sensors=sensors, steps=steps, status=status, free_vol=V, threshold=threshold, k=cfg.k
    )


def random_placement(
    env: Environment, cfg: PlannerConfig, rng: np.random.Generator | None = None
) -> PlacementResult:
    """Baseline: uniform random candidate each step, same termination rule."""
    cand = candidate_cells(env)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    V = free_volume(env)
    threshold = cfg.delta * cfg.k * V
    step_cap = cfg.step_cap if cfg.step_cap is not None else 4 * cfg.k * max(env.shape)

    C = CumulativeVisibility.empty(env, cfg.k)
    sensors = SensorSet()
    steps: list[StepRecord] = []
    status = "reached"
    while True:
        if psi_k(env, C) >= threshold:
            status = "reached"
            break
        if len(sensors) >= step_cap:
            status = "budget"
            break
        pick = cand[int(rng.integers(cand.shape[0]))]
        cell = (int(pick[0]), int(pick[1]))
        pos = sensor_position(env, cell)
        C = update_cumvis(C, visibility_field(env, pos, method="sweep"))
        sensors.append(cell, pos)
        steps.append(
            StepRecord(
                index=len(sensors),
                cell=cell,
                psi=psi_k(env, C),
                k_covered=k_covered_volume(env, C),
                max_gain=None,
            )
        )
    return PlacementResult(
        sensors=sensors, steps=steps, status=status, free_vol=V, threshold=threshold, k=cfg.k
    )
