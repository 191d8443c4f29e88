"""Recurrence plots and trapping time for strategy-vector trajectories.

Cells are indexed ``cells[c, r]`` (column, row). A vertical line is a
maximal run of shaded cells down one column, i.e. along the row axis.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

_BLOCK = 2048


@dataclass
class RecurrencePlot:
    cells: np.ndarray
    eps: float

    @property
    def n(self) -> int:
        return self.cells.shape[0]


def recurrence_radius(dim: int, per_component: float) -> float:
    """Ball radius allowing ``per_component`` slack in each of ``dim`` coordinates."""
    return math.sqrt(dim * per_component ** 2)


def phase_space_diameter(dim: int, lo: float = -1.0, hi: float = 1.0) -> float:
    return math.sqrt(dim * (hi - lo) ** 2)


def build_rp(traj, eps: float, block: int = _BLOCK) -> RecurrencePlot:
    """Shade ``(c, r)`` when samples ``c`` and ``r`` are strictly closer than ``eps``."""
    try:
        x = np.asarray(traj, dtype=float)
    except ValueError as e:
        raise ValueError("samples have mismatched dimensions") from e
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError("trajectory must be a sequence of equal-length vectors")
    if len(x) < 2:
        raise ValueError("need at least two samples")
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = len(x)
    cells = np.empty((n, n), dtype=bool)
    eps2 = eps * eps
    for i in range(0, n, block):
        cells[i:i + block] = cdist(x[i:i + block], x, "sqeuclidean") < eps2
    return RecurrencePlot(cells, eps)


def _column_runs(block: np.ndarray) -> np.ndarray:
    """Lengths of all maximal True runs along axis 1 of a 2-D bool block."""
    pad = np.zeros((block.shape[0], 1), dtype=np.int8)
    d = np.diff(np.hstack([pad, block.astype(np.int8), pad]), axis=1)
    starts = np.nonzero(d == 1)
    ends = np.nonzero(d == -1)
    # nonzero walks row-major, so starts and ends pair up in order
    return ends[1] - starts[1]


@dataclass
class LineDistribution:
    counts: dict  # length -> number of maximal lines
    v_min: int = 2

    def total(self, v_min: int | None = None) -> int:
        v_min = self.v_min if v_min is None else v_min
        return sum(c for v, c in self.counts.items() if v >= v_min)


def vertical_line_distribution(rp, v_min: int = 2, block: int = 512) -> LineDistribution:
    cells = rp.cells if isinstance(rp, RecurrencePlot) else np.asarray(rp, dtype=bool)
    counts: Counter = Counter()
    for i in range(0, cells.shape[0], block):
        lengths = _column_runs(cells[i:i + block])
        v, c = np.unique(lengths, return_counts=True)
        counts.update(dict(zip(v.tolist(), c.tolist())))
    return LineDistribution(dict(sorted(counts.items())), v_min)


def trapping_time(dist: LineDistribution, v_min: int | None = None) -> float | None:
    """Mean vertical line length over lines at least ``v_min`` long; None if there are none."""
    v_min = dist.v_min if v_min is None else v_min
    num = den = 0
    for v, c in dist.counts.items():
        if v >= v_min:
            num += v * c
            den += c
    if den == 0:
        return None
    return num / den


def downsample(cells: np.ndarray, factor: int) -> np.ndarray:
    """Max-pool ``factor`` x ``factor`` blocks; ragged edges form partial blocks."""
    if factor < 1:
        raise ValueError("downsample factor must be >= 1")
    if factor == 1:
        return cells
    n0, n1 = cells.shape
    m0, m1 = -(-n0 // factor), -(-n1 // factor)
    padded = np.zeros((m0 * factor, m1 * factor), dtype=bool)
    padded[:n0, :n1] = cells
    return padded.reshape(m0, factor, m1, factor).any(axis=(1, 3))


def write_pgm(path, cells: np.ndarray) -> None:
    """Binary P5 graymap, shaded cells black, row 0 at the bottom."""
    img = np.where(cells.T[::-1], 0, 255).astype(np.uint8)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Inverse of :func:`write_pgm`: returns ``cells[c, r]``."""
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    img = np.frombuffer(parts[4], dtype=np.uint8, count=w * h).reshape(h, w)
    return (img[::-1] == 0).T


def export_rp(rp: RecurrencePlot, out_dir, factor: int = 1, stem: str = "rp") -> dict:
    """Write ``<stem>.pgm`` and ``<stem>_cells.csv`` (shaded ``c,r`` pairs at full resolution)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pgm = out / f"{stem}.pgm"
    write_pgm(pgm, downsample(rp.cells, factor))
    cells_csv = out / f"{stem}_cells.csv"
    with open(cells_csv, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["c", "r"])
        for i in range(0, rp.n, _BLOCK):
            cs, rs = np.nonzero(rp.cells[i:i + _BLOCK])
            w.writerows(zip((cs + i).tolist(), rs.tolist()))
    return {"pgm": pgm, "cells": cells_csv}


def write_line_distribution(path, dist: LineDistribution) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["length", "count"])
        for v, c in dist.counts.items():
            w.writerow([v, c])


def write_stats(path, stats: dict) -> None:
    with open(path, "w") as fh:
        for k, v in stats.items():
            fh.write(f"{k}={'undefined' if v is None else v}\n")


def read_stats(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if line.strip():
            k, _, v = line.partition("=")
            out[k] = v
    return out


def write_trajectory(path, times, vectors) -> None:
    vectors = np.asarray(vectors, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_hours"] + [f"s_{i}" for i in range(vectors.shape[1])])
        for t, row in zip(times, vectors):
            w.writerow([f"{t:.6f}"] + [f"{v:.6f}" for v in row])


def read_trajectory(path):
    """Return ``(times, samples)`` from a trajectory CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[0] != "time_hours":
        raise ValueError("trajectory CSV must start with a time_hours column")
    width = len(header) - 1
    for i, r in enumerate(body):
        if len(r) - 1 != width:
            raise ValueError(f"row {i} has {len(r) - 1} components, expected {width}")
    arr = np.array(body, dtype=float).reshape(len(body), width + 1)
    if np.any(np.abs(arr[:, 1:]) > 1.0):
        raise ValueError("strategy components must lie in [-1, 1]")
    return arr[:, 0], arr[:, 1:]


def analyse_trajectory(samples, eps: float, v_min: int = 2) -> tuple:
    rp = build_rp(samples, eps)
    dist = vertical_line_distribution(rp, v_min)
    tt = trapping_time(dist)
    stats = {"n": rp.n, "dim": int(np.asarray(samples).reshape(rp.n, -1).shape[1]),
             "eps": eps, "v_min": v_min,
             "recurrence_rate": float(rp.cells.mean()),
             "lines_ge_vmin": dist.total(),
             "trapping_time": tt}
    return rp, dist, stats
