"""Command-line interface: placement runs, dataset generation, analysis, rendering.

All machine-readable artifacts are JSON written with sorted keys and
compact separators, so a fixed seed and fixed inputs reproduce them byte
for byte.  Wall-clock measurements go to a separate timings file to keep
the deterministic artifacts clean.
"""

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
from PIL import Image

from . import __version__
from .backend import BACKEND, set_jobs
from .coverage import CumulativeVisibility, update_cumvis
from .datagen import (
    flood_fill_heights,
    generate_dataset,
    merge_datasets,
    random_building_mask,
)
from .env import Environment, candidate_cells, load_heightmap_png, load_mask_png
from .errors import ConfigError, DomainError, KcoverError, ProviderError
from .planner import PlannerConfig, SensorSet, random_placement, run_placement
from .provider import SubprocessGainProvider
from .render import SliceSpec, render_order_slice, render_placement
from .visibility import visibility_field

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STALL = 2
EXIT_BUDGET = 3

STATUS_EXIT = {"reached": EXIT_OK, "stall": EXIT_STALL, "budget": EXIT_BUDGET}


class CliParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, obj) -> None:
    data = json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":")) + "\n"
    Path(path).write_text(data, encoding="utf-8")


def _parse_first(text):
    if text == "random":
        return "random"
    try:
        i, j = text.split(",")
        return (int(i), int(j))
    except ValueError as exc:
        raise ConfigError(f"--first expects 'i,j' or 'random', got {text!r}") from exc


def _load_map(path, map_seed: int, env_args: dict) -> tuple[Environment, dict]:
    """Build an environment from a heightmap or footprint-mask PNG."""
    img = Image.open(path)
    if img.mode in ("L", "P", "1"):
        mask = load_mask_png(path)
        rng = np.random.default_rng(map_seed)
        terrain = flood_fill_heights(mask, rng)
        desc = {"kind": "mask", "path": str(path), "map_seed": map_seed}
    else:
        terrain = load_heightmap_png(path, z_ceil=env_args.get("z_ceil", 1.0))
        desc = {"kind": "heightmap", "path": str(path), "map_seed": None}
    env = Environment(terrain=terrain, **env_args)
    desc.update(
        {
            "grid": [env.shape[0], env.shape[1]],
            "cell_size": env.cell_size,
            "z_ceil": env.z_ceil,
            "sensor_height": env.sensor_height,
            "ground_threshold": env.ground_threshold,
        }
    )
    return env, desc


def _env_args(args) -> dict:
    return {
        "z_ceil": args.z_ceil,
        "sensor_height": args.sensor_height,
        "ground_threshold": args.ground_threshold,
    }


def _add_env_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--z-ceil", type=float, default=1.0, help="domain ceiling altitude")
    p.add_argument("--sensor-height", type=float, default=0.02, help="mount offset above terrain")
    p.add_argument("--ground-threshold", type=float, default=0.0, help="max terrain height of a sensor site")


def _add_jobs_flag(p: argparse.ArgumentParser) -> None:
    default = int(os.environ.get("KCOVER_JOBS", os.cpu_count() or 1))
    p.add_argument("--jobs", type=int, default=default, help="worker threads for gain maps")


def _trace_dict(result, cfg: PlannerConfig, map_desc: dict, provider_desc: str) -> dict:
    return {
        "version": __version__,
        "backend": BACKEND,
        "config": {
            "k": cfg.k,
            "delta": cfg.delta,
            "epsilon": cfg.epsilon,
            "p": cfg.p,
            "seed": cfg.seed,
            "first_sensor": list(cfg.first_sensor)
            if not isinstance(cfg.first_sensor, str)
            else cfg.first_sensor,
            "gain": cfg.gain,
            "provider": provider_desc,
            "step_cap": cfg.step_cap,
        },
        "map": map_desc,
        "free_volume": result.free_vol,
        "threshold": result.threshold,
        "status": result.status,
        "n_sensors": len(result.sensors),
        "sensors": [
            {"cell": list(c), "pos": [p.x, p.y, p.z]}
            for c, p in zip(result.sensors.cells, result.sensors.points)
        ],
        "steps": [
            {
                "index": s.index,
                "cell": list(s.cell),
                "psi": s.psi,
                "k_covered": s.k_covered,
                "max_gain": s.max_gain,
            }
            for s in result.steps
        ],
    }


def cmd_place(args) -> int:
    set_jobs(args.jobs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    env, map_desc = _load_map(args.map, args.map_seed, _env_args(args))
    cfg = PlannerConfig(
        k=args.k,
        delta=args.delta,
        epsilon=args.epsilon,
        seed=args.seed,
        first_sensor=_parse_first(args.first),
        gain=args.gain,
        provider=args.provider,
        step_cap=args.step_cap,
    )
    provider = None
    provider_desc = "exact"
    if args.provider.startswith("surrogate:"):
        provider = SubprocessGainProvider(args.provider[len("surrogate:") :])
        provider_desc = args.provider
    elif args.provider != "exact":
        raise ConfigError(f"--provider must be 'exact' or 'surrogate:CMD', got {args.provider!r}")

    t0 = time.perf_counter()
    try:
        if args.random_baseline:
            result = random_placement(env, cfg)
        else:
            result = run_placement(env, cfg, provider=provider)
    finally:
        if provider is not None:
            provider.close()
    elapsed = time.perf_counter() - t0

    write_json(out_dir / "trace.json", _trace_dict(result, cfg, map_desc, provider_desc))
    write_json(
        out_dir / "timings.json",
        {"wall_s": elapsed, "per_step_s": elapsed / max(1, len(result.steps))},
    )
    if args.render:
        C = CumulativeVisibility.empty(env, cfg.k)
        for p in result.sensors.points:
            C = update_cumvis(C, visibility_field(env, p))
        render_placement(env, result.sensors, C).save(out_dir / "placement.png")
    print(
        f"{result.status}: {len(result.sensors)} sensors, "
        f"psi={result.psi:.4f} / threshold={result.threshold:.4f}"
    )
    return STATUS_EXIT[result.status]


def cmd_gendata(args) -> int:
    set_jobs(args.jobs)
    if args.merge:
        takes = [int(x) for x in args.take.split(",")] if args.take else []
        if len(takes) != len(args.merge):
            raise ConfigError(
                f"--take needs one count per merged dataset ({len(args.merge)}), got {takes}"
            )
        manifest = merge_datasets(list(zip(args.merge, takes)), args.out, seed=args.seed)
        print(f"merged {manifest.n} samples into {args.out}")
        return EXIT_OK
    cfg = PlannerConfig(
        k=args.k,
        delta=args.delta,
        epsilon=args.epsilon,
        seed=args.seed,
        first_sensor="random",
    )
    manifest = generate_dataset(
        sources=args.sources or [],
        n=args.n,
        cfg=cfg,
        out_dir=args.out,
        grid=args.grid,
        density=args.density,
        env_kwargs=_env_args(args),
    )
    print(f"wrote {manifest.n} samples ({manifest.extra['maps_used']} maps) to {args.out}")
    return EXIT_OK


def _benchmark_envs(args):
    envs = []
    if args.maps:
        for path in args.maps:
            env, desc = _load_map(path, args.seed, _env_args(args))
            envs.append((env, desc))
    else:
        for m in range(args.generate):
            rng = np.random.default_rng([args.seed, m])
            mask = random_building_mask(rng, args.grid, density=args.density)
            terrain = flood_fill_heights(mask, rng)
            env = Environment(terrain=terrain, **_env_args(args))
            envs.append((env, {"kind": "synthetic", "index": m, "seed": args.seed}))
    return envs


def cmd_benchmark(args) -> int:
    set_jobs(args.jobs)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    strategies = args.strategies.split(",")
    provider_cmd = None
    for s in strategies:
        if s.startswith("surrogate:"):
            provider_cmd = s[len("surrogate:") :]
        elif s not in ("greedy", "random"):
            raise ConfigError(f"unknown strategy {s!r}")

    envs = _benchmark_envs(args)
    per_map = []
    counts: dict[str, list] = {s: [] for s in strategies}
    for m, (env, desc) in enumerate(envs):
        rng = np.random.default_rng([args.seed, m, 7])
        try:
            cand = candidate_cells(env)
        except KcoverError as exc:
            per_map.append({"map": desc, "error": str(exc)})
            for strat in strategies:
                counts[strat].append(None)
            continue
        first = tuple(int(v) for v in cand[int(rng.integers(cand.shape[0]))])
        entry = {"map": desc, "first": list(first), "results": {}}
        for strat in strategies:
            cfg = PlannerConfig(
                k=args.k,
                delta=args.delta,
                epsilon=args.epsilon,
                seed=int(np.random.default_rng([args.seed, m, 13]).integers(2**31)),
                first_sensor=first,
            )
            try:
                t0 = time.perf_counter()
                if strat == "random":
                    result = random_placement(env, cfg)
                elif strat == "greedy":
                    result = run_placement(env, cfg)
                else:
                    with SubprocessGainProvider(provider_cmd) as prov:
                        result = run_placement(env, cfg, provider=prov)
                dt = time.perf_counter() - t0
                entry["results"][strat] = {
                    "n_sensors": len(result.sensors),
                    "status": result.status,
                    "psi": result.psi,
                    "wall_s": dt,
                }
                counts[strat].append(len(result.sensors))
            except KcoverError as exc:
                entry["results"][strat] = {"error": str(exc)}
                counts[strat].append(None)
        per_map.append(entry)

    summary = {}
    for strat, vals in counts.items():
        ok = [v for v in vals if v is not None]
        summary[strat] = {
            "mean": float(np.mean(ok)) if ok else None,
            "min": int(np.min(ok)) if ok else None,
            "max": int(np.max(ok)) if ok else None,
            "failures": sum(1 for v in vals if v is None),
            "counts": vals,
        }
    if "greedy" in counts and "random" in counts:
        summary["sign_test"] = _sign_test(counts["greedy"], counts["random"])

    report = {
        "version": __version__,
        "config": {
            "k": args.k,
            "delta": args.delta,
            "epsilon": args.epsilon,
            "seed": args.seed,
            "n_maps": len(envs),
            "grid": args.grid if not args.maps else None,
            "strategies": strategies,
        },
        "summary": summary,
        "maps": per_map,
    }
    write_json(out_dir / "report.json", report)
    _plot_histogram(counts, out_dir / "histogram.png")
    for strat in strategies:
        mean = summary[strat]["mean"]
        print(f"{strat}: mean sensors = {mean if mean is None else round(mean, 2)}")
    if "sign_test" in summary:
        print(f"greedy < random sign test: p={summary['sign_test']['p_value']:.2e}")
    return EXIT_OK


def _sign_test(greedy, random_counts) -> dict:
    """One-sided sign test that greedy needs fewer sensors than random."""
    from scipy import stats

    wins = losses = 0
    for g, r in zip(greedy, random_counts):
        if g is None or r is None or g == r:
            continue
        if g < r:
            wins += 1
        else:
            losses += 1
    trials = wins + losses
    if trials == 0:
        return {"wins": 0, "trials": 0, "p_value": 1.0}
    p = float(stats.binomtest(wins, trials, 0.5, alternative="greater").pvalue)
    return {"wins": wins, "trials": trials, "p_value": p}


def _plot_histogram(counts: dict, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    series = {s: [v for v in vals if v is not None] for s, vals in counts.items()}
    all_vals = [v for vals in series.values() for v in vals]
    if all_vals:
        bins = np.arange(min(all_vals) - 0.5, max(all_vals) + 1.5, 1.0)
        for strat, vals in sorted(series.items()):
            ax.hist(vals, bins=bins, alpha=0.55, label=strat)
    ax.set_xlabel("sensors needed")
    ax.set_ylabel("maps")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_analyze(args) -> int:
    from .analysis import compare_spectra, extract_final_stage, plot_spectra

    named = {}
    for spec in args.data:
        if "=" not in spec:
            raise ConfigError(f"--data expects NAME=DIR, got {spec!r}")
        name, path = spec.split("=", 1)
        named[name] = extract_final_stage(path, rows=args.rows)
    report = compare_spectra(named, count=args.count)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "spectra.json", report)
    plot_spectra(report, out_dir / "spectra.png", log_y=args.log_y)
    for name, entry in sorted(report["datasets"].items()):
        print(
            f"{name}: PR={entry['participation_ratio']:.2f} "
            f"rank95={entry['energy95_rank']} rows={entry['rows']}"
        )
    return EXIT_OK


def cmd_render(args) -> int:
    run_dir = Path(args.run)
    trace = json.loads((run_dir / "trace.json").read_text(encoding="utf-8"))
    map_desc = trace["map"]
    env_args = {
        "z_ceil": map_desc["z_ceil"],
        "sensor_height": map_desc["sensor_height"],
        "ground_threshold": map_desc["ground_threshold"],
    }
    env, _ = _load_map(map_desc["path"], map_desc.get("map_seed") or 0, env_args)
    from .env import Point3

    sensors = SensorSet()
    for s in trace["sensors"]:
        sensors.append(tuple(s["cell"]), Point3(*s["pos"]))
    C = CumulativeVisibility.empty(env, trace["config"]["k"])
    for p in sensors.points:
        C = update_cumvis(C, visibility_field(env, p))

    if args.mode == "placement":
        img = render_placement(env, sensors, C, z_ref=args.z, scale=args.scale)
    else:
        coord = args.z if args.mode == "horizontal" else args.index
        spec = SliceSpec(
            axis=args.mode,
            coord=coord,
            colormap=args.colormap,
            scale=args.scale,
            show_sensors=args.sensors,
            contour=args.contour,
        )
        img = render_order_slice(env, C, spec, sensors=sensors)
    img.save(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> CliParser:
    p = CliParser(prog="kcover", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pl = sub.add_parser("place", help="run one sensor placement")
    pl.add_argument("--map", required=True, help="16-bit heightmap PNG or 8-bit footprint mask PNG")
    pl.add_argument("--map-seed", type=int, default=0, help="height assignment seed for mask inputs")
    pl.add_argument("--k", type=int, default=2, help="target visibility order")
    pl.add_argument("--delta", type=float, default=0.95, help="coverage-fraction termination threshold")
    pl.add_argument("--epsilon", type=float, default=0.0, help="near-greedy selection width")
    pl.add_argument("--seed", type=int, default=0)
    pl.add_argument("--first", default="0,0", help="'i,j' cell or 'random'")
    pl.add_argument("--gain", choices=("weighted", "naive"), default="weighted")
    pl.add_argument("--provider", default="exact", help="'exact' or 'surrogate:CMDLINE'")
    pl.add_argument("--step-cap", type=int, default=None)
    pl.add_argument("--random-baseline", action="store_true", help="random placement instead of greedy")
    pl.add_argument("--render", action="store_true", help="also write placement.png")
    pl.add_argument("--out", required=True)
    _add_env_flags(pl)
    _add_jobs_flag(pl)
    pl.set_defaults(func=cmd_place)

    gd = sub.add_parser("gendata", help="generate or merge training datasets")
    gd.add_argument("--n", type=int, default=100, help="samples to generate")
    gd.add_argument("--epsilon", type=float, default=0.0)
    gd.add_argument("--grid", type=int, default=128, help="map side length in cells")
    gd.add_argument("--k", type=int, default=2)
    gd.add_argument("--delta", type=float, default=0.95)
    gd.add_argument("--seed", type=int, default=0)
    gd.add_argument("--sources", nargs="*", help="footprint mask PNGs (procedural when omitted)")
    gd.add_argument("--density", type=float, default=0.25, help="procedural building density")
    gd.add_argument("--merge", nargs="*", help="merge these dataset dirs instead of generating")
    gd.add_argument("--take", help="comma-separated sample counts for --merge")
    gd.add_argument("--out", required=True)
    _add_env_flags(gd)
    _add_jobs_flag(gd)
    gd.set_defaults(func=cmd_gendata)

    bm = sub.add_parser("benchmark", help="compare strategies over a map corpus")
    bm.add_argument("--maps", nargs="*", help="map PNGs; omit to generate synthetic maps")
    bm.add_argument("--generate", type=int, default=20, help="number of synthetic maps")
    bm.add_argument("--grid", type=int, default=64)
    bm.add_argument("--density", type=float, default=0.25)
    bm.add_argument("--k", type=int, default=2)
    bm.add_argument("--delta", type=float, default=0.95)
    bm.add_argument("--epsilon", type=float, default=0.0)
    bm.add_argument("--seed", type=int, default=0)
    bm.add_argument("--strategies", default="greedy,random", help="comma list: greedy,random,surrogate:CMD")
    bm.add_argument("--out", required=True)
    _add_env_flags(bm)
    _add_jobs_flag(bm)
    bm.set_defaults(func=cmd_benchmark)

    an = sub.add_parser("analyze", help="final-stage singular-value spectra of datasets")
    an.add_argument("--data", nargs="+", required=True, help="NAME=DATASET_DIR entries")
    an.add_argument("--count", type=int, default=20)
    an.add_argument("--rows", choices=("gain", "inputs"), default="gain")
    an.add_argument("--log-y", action="store_true")
    an.add_argument("--out", required=True)
    an.set_defaults(func=cmd_analyze)

    rd = sub.add_parser("render", help="render slices of a saved placement run")
    rd.add_argument("--run", required=True, help="directory written by 'place'")
    rd.add_argument(
        "--mode",
        choices=("horizontal", "vertical-row", "vertical-col", "placement"),
        default="placement",
    )
    rd.add_argument("--z", type=float, default=0.5, help="altitude for horizontal/placement")
    rd.add_argument("--index", type=int, default=0, help="row/col index for vertical slices")
    rd.add_argument("--scale", type=int, default=8)
    rd.add_argument("--colormap", default="default", help="order palette name")
    rd.add_argument("--sensors", action="store_true", help="overlay sensor markers")
    rd.add_argument("--contour", action="store_true", help="outline building footprints")
    rd.add_argument("--out", required=True)
    rd.set_defaults(func=cmd_render)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ProviderError as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
