"""Snapshot datasets: the analytic gaussian-bump generator and CSV exchange.

Snapshot files hold one state per column.  Layout: a header line
``# n0=<rows> S=<cols>`` followed by ``n0`` rows of ``S`` comma-separated
decimal floats.  Values are written with ``repr`` so a save/load round
trip is bit-exact.  Generating parameters ride along in an optional
sibling ``<name>.params.csv`` with the same column convention.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "DataFormatError",
    "SnapshotSet",
    "PGA_GRID_POINTS",
    "gaussian_bump",
    "generate_pga",
    "save_snapshots",
    "load_snapshots",
]

PGA_GRID_POINTS = 514  # uniform grid i/513, i = 0..513, on [0, 1]
_PGA_MU_RANGE = (0.3, 0.7)
_HEADER_RE = re.compile(r"^# n0=(\d+) S=(\d+)\s*$")


class DataFormatError(ValueError):
    """A snapshot file failed to parse or carries invalid values."""


@dataclass(frozen=True)
class SnapshotSet:
    U: np.ndarray
    param_values: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        if self.param_values is not None and self.param_values.shape[1] != self.U.shape[1]:
            raise ValueError(
                f"parameter columns {self.param_values.shape[1]} != snapshots {self.U.shape[1]}"
            )


def gaussian_bump(x, mu):
    """Traveling-bump profile ``exp(-400 (x - mu)^2)`` on the unit interval."""
    return np.exp(-400.0 * (np.asarray(x, dtype=np.float64) - mu) ** 2)


def generate_pga(S: int, seed: int) -> SnapshotSet:
    """Sample the parameterized gaussian dataset.

    Each column is the bump profile on the 514-node uniform grid with its
    center drawn uniformly from [0.3, 0.7].
    """
    if S < 1:
        raise ValueError("need at least one sample")
    x = np.arange(PGA_GRID_POINTS, dtype=np.float64) / (PGA_GRID_POINTS - 1)
    mu = np.random.default_rng(seed).uniform(*_PGA_MU_RANGE, size=S)
    U = gaussian_bump(x[:, None], mu[None, :])
    return SnapshotSet(U=U, param_values=mu[None, :].copy(), source=f"pga(S={S}, seed={seed})")


def _params_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".params.csv")


def _write_matrix(path: Path, M: np.ndarray):
    with open(path, "w") as fh:
        fh.write(f"# n0={M.shape[0]} S={M.shape[1]}\n")
        for row in M:
            fh.write(",".join(repr(v) for v in row.tolist()) + "\n")


def save_snapshots(snapshots: SnapshotSet, path):
    """Write the snapshot CSV (and the params sibling when present)."""
    _write_matrix(Path(path), snapshots.U)
    if snapshots.param_values is not None:
        _write_matrix(_params_path(path), snapshots.param_values)


def _read_matrix(path: Path) -> np.ndarray:
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    header = _HEADER_RE.match(lines[0])
    if header is None:
        raise DataFormatError(
            f"{path}:1: expected header '# n0=<int> S=<int>', got {lines[0]!r}"
        )
    n0, S = int(header.group(1)), int(header.group(2))
    body = [line for line in lines[1:] if line.strip()]
    if len(body) != n0:
        raise DataFormatError(
            f"{path}: header promises n0={n0} rows, found {len(body)}"
        )
    out = np.empty((n0, S))
    for i, line in enumerate(body):
        cells = line.split(",")
        if len(cells) != S:
            raise DataFormatError(
                f"{path}:{i + 2}: expected {S} columns, found {len(cells)}"
            )
        try:
            out[i] = [float(c) for c in cells]
        except ValueError as exc:
            raise DataFormatError(f"{path}:{i + 2}: {exc}") from exc
        if not np.all(np.isfinite(out[i])):
            raise DataFormatError(f"{path}:{i + 2}: non-finite value")
    return out


def load_snapshots(path) -> SnapshotSet:
    """Read a snapshot CSV; picks up the params sibling when it exists."""
    path = Path(path)
    U = _read_matrix(path)
    params_file = _params_path(path)
    params = _read_matrix(params_file) if params_file.exists() else None
    return SnapshotSet(U=U, param_values=params, source=str(path))
