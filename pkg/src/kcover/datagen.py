"""Training-pair generation and the on-disk dataset container.

A dataset directory holds ``manifest.json`` plus ``samples/NNNNNNNN.bin``
files of ``(1 + k + 1) * H * W`` little-endian float32 values in channel
order ``obs, c1..ck, gain``.  Each sample is the planner state *before* one
placement step together with the exact gain map that step evaluated; the
first sensor of a run never produces a sample (it is placed without a gain
map).
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .env import Environment, HeightField
from .errors import ConfigError, DomainError
from .planner import PlannerConfig, run_placement

DTYPE = "f32le"
LAYOUT = "row-major"


def flood_fill_heights(mask: np.ndarray, rng: np.random.Generator, h_range=(0.1, 0.9)) -> HeightField:
    """Assign one uniform random height to every connected building component.

    Components are 4-connected regions of nonzero mask cells; background
    stays at height 0.  An all-zero mask yields flat terrain.
    """
    mask = np.asarray(mask) != 0
    labels, n = ndimage.label(mask)
    out = np.zeros(mask.shape, dtype=np.float64)
    if n > 0:
        lo, hi = h_range
        heights = rng.uniform(lo, hi, size=n)
        out[mask] = heights[labels[mask] - 1]
    return HeightField(out)


def random_crop(src: np.ndarray, size: int, rng: np.random.Generator):
    """Uniformly positioned size x size window; returns (crop, (row, col) offset)."""
    src = np.asarray(src)
    H, W = src.shape
    if H < size or W < size:
        raise DomainError(f"source {H}x{W} smaller than crop size {size}")
    oi = int(rng.integers(H - size + 1))
    oj = int(rng.integers(W - size + 1))
    return src[oi : oi + size, oj : oj + size].copy(), (oi, oj)


def random_building_mask(
    rng: np.random.Generator,
    size: int,
    density: float = 0.25,
    side_range: tuple[int, int] | None = None,
) -> np.ndarray:
    """Procedural urban-like footprint: axis-aligned rectangles until ~density filled."""
    if side_range is None:
        side_range = (max(2, size // 16), max(3, size // 4))
    mask = np.zeros((size, size), dtype=np.uint8)
    target = density * size * size
    lo, hi = side_range
    for _ in range(10 * size):
        if mask.sum() >= target:
            break
        h = int(rng.integers(lo, hi + 1))
        w = int(rng.integers(lo, hi + 1))
        i = int(rng.integers(0, size - h + 1))
        j = int(rng.integers(0, size - w + 1))
        mask[i : i + h, j : j + w] = 1
    return mask


@dataclass
class DatasetManifest:
    n: int
    grid: list[int]
    k: int
    epsilon: float | list[float]
    seed: int
    sources: list
    channels: list[str]
    samples: list[dict] = field(default_factory=list)
    dtype: str = DTYPE
    layout: str = LAYOUT
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "grid": self.grid,
            "k": self.k,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "sources": self.sources,
            "channels": self.channels,
            "dtype": self.dtype,
            "layout": self.layout,
            "samples": self.samples,
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        return cls(
            n=d["n"],
            grid=list(d["grid"]),
            k=d["k"],
            epsilon=d["epsilon"],
            seed=d["seed"],
            sources=d.get("sources", []),
            channels=list(d["channels"]),
            samples=list(d.get("samples", [])),
            dtype=d.get("dtype", DTYPE),
            layout=d.get("layout", LAYOUT),
            extra=d.get("extra", {}),
        )


def channel_names(k: int) -> list[str]:
    return ["obs"] + [f"c{i}" for i in range(1, k + 1)] + ["gain"]


def sample_path(dataset_dir, index: int) -> Path:
    return Path(dataset_dir) / "samples" / f"{index:08d}.bin"


def write_sample(dataset_dir, index: int, stacked: np.ndarray) -> str:
    """Write one (channels, H, W) float32 tensor; returns the relative path."""
    path = sample_path(dataset_dir, index)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(np.ascontiguousarray(stacked, dtype="<f4").tobytes())
    return str(Path("samples") / path.name)


def read_sample(dataset_dir, manifest: DatasetManifest, index: int) -> np.ndarray:
    """Read one sample back as a (channels, H, W) float32 tensor."""
    nchan = len(manifest.channels)
    H, W = manifest.grid
    raw = sample_path(dataset_dir, index).read_bytes()
    expect = nchan * H * W * 4
    if len(raw) != expect:
        raise ConfigError(
            f"sample {index:08d} has {len(raw)} bytes, expected {expect}"
        )
    return np.frombuffer(raw, dtype="<f4").reshape(nchan, H, W)


def load_manifest(dataset_dir) -> DatasetManifest:
    with open(Path(dataset_dir) / "manifest.json", encoding="utf-8") as f:
        return DatasetManifest.from_dict(json.load(f))


def save_manifest(dataset_dir, manifest: DatasetManifest) -> None:
    path = Path(dataset_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest.to_dict(), f, sort_keys=True, indent=1)
        f.write("\n")


def normalized_gain_channel(gm_values: np.ndarray, valid: np.ndarray) -> np.ndarray:
    """Gain map scaled by its maximum (an all-zero map stays all zero)."""
    out = np.where(valid, gm_values, 0.0)
    top = float(out.max()) if out.size else 0.0
    if top > 0.0:
        out = out / top
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _load_source(src) -> np.ndarray:
    if isinstance(src, np.ndarray):
        return src
    from .env import load_mask_png

    return load_mask_png(src)


def generate_dataset(
    sources,
    n: int,
    cfg: PlannerConfig,
    out_dir,
    grid: int = 128,
    h_range=(0.1, 0.9),
    density: float = 0.25,
    env_kwargs: dict | None = None,
) -> DatasetManifest:
    """Run seeded placements over cropped, randomly-heighted maps and store samples.

    ``sources`` is a list of footprint masks (arrays or PNG paths); when
    empty, procedural masks are drawn instead.  Map m uses the rng stream
    (cfg.seed, m) for its crop, heights, first sensor and selections, so
    output is reproducible sample-for-sample.
    """
    if cfg.k < 1:
        raise ConfigError("dataset generation needs k >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    source_arrays = [_load_source(s) for s in sources] if sources else []
    source_desc = [
        (str(s) if not isinstance(s, np.ndarray) else f"array{list(s.shape)}") for s in sources
    ] or ["procedural"]
    env_kwargs = env_kwargs or {}

    manifest = DatasetManifest(
        n=0,
        grid=[grid, grid],
        k=cfg.k,
        epsilon=cfg.epsilon,
        seed=cfg.seed,
        sources=source_desc,
        channels=channel_names(cfg.k),
        extra={"delta": cfg.delta, "h_range": list(h_range), "gain": cfg.gain},
    )

    written = 0
    map_index = 0
    try:
        while written < n:
            rng = np.random.default_rng([cfg.seed, map_index])
            if source_arrays:
                src = source_arrays[map_index % len(source_arrays)]
                mask, offset = random_crop(src, grid, rng)
            else:
                mask = random_building_mask(rng, grid, density=density)
                offset = None
            terrain = flood_fill_heights(mask, rng, h_range=h_range)
            env = Environment(terrain=terrain, **env_kwargs)

            run_cfg = PlannerConfig(
                k=cfg.k,
                delta=cfg.delta,
                epsilon=cfg.epsilon,
                p=cfg.p,
                seed=cfg.seed,
                first_sensor="random",
                gain=cfg.gain,
                step_cap=cfg.step_cap,
            )
            result = run_placement(env, run_cfg, rng=rng, record_maps=True)

            obs = (env.heights / env.z_ceil).astype(np.float32)
            for step in result.steps:
                if step.gain_map is None:
                    continue
                cum = (np.clip(step.layers_before, 0.0, env.z_ceil) / env.z_ceil).astype(np.float32)
                y = normalized_gain_channel(step.gain_map.values, step.gain_map.valid)
                stacked = np.concatenate([obs[None], cum, y[None]], axis=0)
                rel = write_sample(out_dir, written, stacked)
                manifest.samples.append(
                    {
                        "file": rel,
                        "run": map_index,
                        "step": step.index,
                        "chosen": [step.cell[0], step.cell[1]],
                        "epsilon": cfg.epsilon,
                        "offset": list(offset) if offset is not None else None,
                        "status": result.status,
                    }
                )
                written += 1
                if written >= n:
                    break
            map_index += 1
    except OSError:
        # never leave sample files behind without a matching manifest
        for idx in range(written + 1):
            sample_path(out_dir, idx).unlink(missing_ok=True)
        raise

    manifest.n = written
    manifest.extra["maps_used"] = map_index
    save_manifest(out_dir, manifest)
    return manifest


def merge_datasets(inputs: list[tuple[str, int]], out_dir, seed: int = 0) -> DatasetManifest:
    """Build a merged dataset taking ``take`` samples from each input.

    Whole runs are drawn in seeded random order; if a run does not fit the
    remaining quota its latest samples are kept (final-stage geometry is
    what downstream analysis cares about).  Sample files are copied and
    renumbered.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    merged_samples: list[dict] = []
    epsilons: list[float] = []
    provenance = []
    written = 0
    grid = None
    k = None
    for src_dir, take in inputs:
        man = load_manifest(src_dir)
        if grid is None:
            grid, k = man.grid, man.k
        elif man.grid != grid or man.k != k:
            raise ConfigError(
                f"cannot merge {src_dir}: grid/order {man.grid}/{man.k} != {grid}/{k}"
            )
        if take > man.n:
            raise ConfigError(f"asked for {take} samples but {src_dir} has {man.n}")
        runs: dict[int, list[tuple[int, dict]]] = {}
        for idx, meta in enumerate(man.samples):
            runs.setdefault(meta["run"], []).append((idx, meta))
        run_ids = sorted(runs)
        rng.shuffle(run_ids)
        quota = take
        for rid in run_ids:
            if quota <= 0:
                break
            entries = sorted(runs[rid], key=lambda e: e[1]["step"])
            if len(entries) > quota:
                entries = entries[-quota:]
            for idx, meta in entries:
                data = read_sample(src_dir, man, idx)
                rel = write_sample(out_dir, written, data)
                new_meta = dict(meta)
                new_meta["file"] = rel
                new_meta["origin"] = str(src_dir)
                new_meta["run"] = f"{Path(src_dir).name}/{rid}"
                merged_samples.append(new_meta)
                written += 1
            quota -= len(entries)
        if isinstance(man.epsilon, list):
            epsilons.extend(man.epsilon)
        else:
            epsilons.append(man.epsilon)
        provenance.append({"path": str(src_dir), "take": take, "epsilon": man.epsilon})

    epsilons = sorted(set(float(e) for e in epsilons))
    manifest = DatasetManifest(
        n=written,
        grid=grid,
        k=k,
        epsilon=epsilons if len(epsilons) > 1 else epsilons[0],
        seed=seed,
        sources=[p["path"] for p in provenance],
        channels=channel_names(k),
        samples=merged_samples,
        extra={"merged_from": provenance},
    )
    save_manifest(out_dir, manifest)
    return manifest


def heightfield_from_sample(dataset_dir, index: int, z_ceil: float = 1.0) -> HeightField:
    """Recover the terrain channel of a stored sample as a HeightField."""
    man = load_manifest(dataset_dir)
    data = read_sample(dataset_dir, man, index)
    return HeightField(data[0].astype(np.float64) * z_ceil)
