"""Data-geometry diagnostics: final-stage slices and singular-value spectra.

Placement runs drift into a distinct regime near the end (many far-apart
cells with near-identical gain), so the spectrum of the late-stage samples
says more about how hard a dataset is to learn than the full set does.
These helpers extract that slice, compute PCA singular values, and compare
spectra across datasets.  Everything here is diagnostic; nothing asserts a
pass or fail.
"""

from dataclasses import dataclass

import numpy as np

from .datagen import DatasetManifest, load_manifest, read_sample
from .errors import DomainError

FINAL_STAGE_TAIL = 10
FINAL_STAGE_SHORT_RUN = 20


@dataclass
class StageSlice:
    """Flattened samples (one row each) from the final stage of every run."""

    rows: np.ndarray
    provenance: dict


@dataclass
class Spectrum:
    values: np.ndarray
    padded: bool
    route: str


def final_stage_indices(lengths_by_run: dict) -> dict:
    """Per run: the last 10 sample positions, or the last half for short runs.

    Runs of length >= 20 contribute their final 10 samples; shorter runs
    contribute their second half, middle sample included for odd lengths.
    """
    out = {}
    for run, L in lengths_by_run.items():
        if L >= FINAL_STAGE_SHORT_RUN:
            take = FINAL_STAGE_TAIL
        else:
            take = (L + 1) // 2
        out[run] = list(range(L - take, L))
    return out


def extract_final_stage(dataset_dir, rows: str = "gain") -> StageSlice:
    """Load the final-stage samples of a dataset as a row matrix.

    ``rows="gain"`` flattens the gain channel (the default: it is the
    quantity whose geometry shapes what a surrogate has to output);
    ``rows="inputs"`` concatenates the obs + cumulative channels instead.
    """
    if rows not in ("gain", "inputs"):
        raise DomainError(f"rows must be 'gain' or 'inputs', got {rows!r}")
    man = load_manifest(dataset_dir)
    by_run: dict = {}
    for idx, meta in enumerate(man.samples):
        by_run.setdefault(meta["run"], []).append((meta["step"], idx))
    selected: list[int] = []
    for run in sorted(by_run, key=str):
        entries = sorted(by_run[run])
        L = len(entries)
        take = FINAL_STAGE_TAIL if L >= FINAL_STAGE_SHORT_RUN else (L + 1) // 2
        selected.extend(idx for _, idx in entries[L - take :])
    if not selected:
        raise DomainError(f"dataset {dataset_dir} has no samples to slice")
    mats = []
    for idx in selected:
        data = read_sample(dataset_dir, man, idx)
        if rows == "gain":
            mats.append(data[-1].ravel())
        else:
            mats.append(data[:-1].ravel())
    return StageSlice(
        rows=np.stack(mats).astype(np.float64),
        provenance={
            "dataset": str(dataset_dir),
            "rows": rows,
            "n_rows": len(selected),
            "rule": f"last {FINAL_STAGE_TAIL} per run, last half under {FINAL_STAGE_SHORT_RUN}",
        },
    )


def singular_values(matrix: np.ndarray, count: int = 20, method: str = "auto") -> Spectrum:
    """Leading singular values of the row-centered matrix, nonincreasing.

    ``method="gram"`` goes through eigenvalues of the small R x R Gram
    matrix (the fast route when rows << columns); ``method="svd"`` is the
    dense reference.  ``auto`` picks gram for wide matrices.  If the matrix
    carries fewer values than requested the result is zero-padded and
    flagged.
    """
    X = np.asarray(matrix, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DomainError(f"need a matrix with at least 2 rows, got shape {X.shape}")
    Xc = X - X.mean(axis=0, keepdims=True)
    R, D = Xc.shape
    if method == "auto":
        method = "gram" if R < D else "svd"
    if method == "gram":
        G = Xc @ Xc.T
        eig = np.clip(np.linalg.eigvalsh(G)[::-1], 0.0, None)
        # numerical-rank cutoff: the squared route cannot resolve below
        # eps-level eigenvalue noise, so report those values as exact zeros
        tol = eig[0] * R * np.finfo(np.float64).eps if eig.size else 0.0
        eig[eig < tol] = 0.0
        s = np.sqrt(eig)
    elif method == "svd":
        s = np.linalg.svd(Xc, compute_uv=False)
    else:
        raise DomainError(f"unknown method {method!r}")
    s = np.sort(s)[::-1]
    padded = s.size < count
    out = np.zeros(count)
    out[: min(count, s.size)] = s[:count]
    return Spectrum(values=out, padded=padded, route=method)


def participation_ratio(s: np.ndarray) -> float:
    """Effective dimensionality (sum s^2)^2 / sum s^4; 0 for an all-zero spectrum."""
    s2 = np.asarray(s, dtype=np.float64) ** 2
    total = s2.sum()
    if total == 0.0:
        return 0.0
    return float(total * total / np.sum(s2 * s2))


def energy_rank(s: np.ndarray, fraction: float = 0.95) -> int:
    """Smallest r with the top-r squared values holding >= fraction of the energy."""
    s2 = np.asarray(s, dtype=np.float64) ** 2
    total = s2.sum()
    if total == 0.0:
        return 0
    cum = np.cumsum(s2) / total
    return int(np.searchsorted(cum, fraction) + 1)


def compare_spectra(named_slices: dict, count: int = 20) -> dict:
    """Aligned spectra plus effective-rank summaries for several datasets."""
    if len(named_slices) < 2:
        raise DomainError("need at least two named slices to compare")
    report = {"count": count, "datasets": {}}
    for name, item in named_slices.items():
        rows = item.rows if isinstance(item, StageSlice) else np.asarray(item)
        spec = singular_values(rows, count=count)
        report["datasets"][name] = {
            "singular_values": [float(v) for v in spec.values],
            "participation_ratio": participation_ratio(spec.values),
            "energy95_rank": energy_rank(spec.values),
            "padded": bool(spec.padded),
            "rows": int(rows.shape[0]),
            "columns": int(rows.shape[1]),
            "provenance": item.provenance if isinstance(item, StageSlice) else {},
        }
    return report


def plot_spectra(report: dict, path, log_y: bool = False) -> None:
    """Line plot of spectra by index, one series per dataset."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for name, entry in sorted(report["datasets"].items()):
        vals = entry["singular_values"]
        ax.plot(range(1, len(vals) + 1), vals, marker="o", markersize=3, label=name)
    ax.set_xlabel("singular value index (by magnitude)")
    ax.set_ylabel("singular value")
    if log_y:
        ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
