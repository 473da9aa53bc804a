"""Per-cell z statistics with Welford's single-pass recurrence."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .config import Config
from .grid import GridMap, Projection
from .kitti import PointCloud


@dataclass(frozen=True)
class CellStats:
    """Running statistics of one cell. ``count == 0`` is the empty element."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    min_z: float = math.inf
    max_z: float = -math.inf

    @property
    def variance(self) -> float:
        """Population variance; zero for fewer than two samples."""
        return self.m2 / self.count if self.count > 1 else 0.0

    def accumulate(self, z: float) -> "CellStats":
        n = self.count + 1
        delta = z - self.mean
        mean = self.mean + delta / n
        return CellStats(n, mean, self.m2 + delta * (z - mean), min(self.min_z, z), max(self.max_z, z))

    def merge(self, other: "CellStats") -> "CellStats":
        """Combine two disjoint sample sets (Chan et al. pairwise update)."""
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = self.m2 + other.m2 + delta * delta * self.count * other.count / n
        return CellStats(n, mean, m2, min(self.min_z, other.min_z), max(self.max_z, other.max_z))

    @classmethod
    def of(cls, samples) -> "CellStats":
        stats = cls()
        for z in samples:
            stats = stats.accumulate(float(z))
        return stats


def accumulate(stats: CellStats, z: float) -> CellStats:
    return stats.accumulate(z)


def merge(a: CellStats, b: CellStats) -> CellStats:
    return a.merge(b)


def _split(n: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def rasterize(cloud: PointCloud, grid: GridMap, cfg: Config | None = None,
              proj: Projection | None = None) -> int:
    """Fill the per-frame layers of ``grid`` from a world-frame cloud.

    Each of ``cfg.worker_count`` workers owns a contiguous block of map rows
    and scans all points, updating only its own cells. A cell's samples are
    therefore always folded in input order and the result is bitwise
    independent of the worker count.

    Previous per-frame layers are overwritten. ``proj`` may carry the
    cloud's precomputed grid projection.

    Returns the number of points that fell outside the map.
    """
    workers = cfg.worker_count if cfg is not None else 1
    xyz = cloud.xyz
    n_cells = grid.dims * grid.dims
    if proj is None:
        proj = grid.project(xyz[:, 0], xyz[:, 1])
    cell = proj.flat
    z = np.ascontiguousarray(xyz[:, 2], dtype=np.float64)

    count = np.zeros(n_cells, dtype=np.int64)
    mean = np.zeros(n_cells)
    m2 = np.zeros(n_cells)
    zmin = np.full(n_cells, np.inf)
    zmax = np.full(n_cells, -np.inf)

    row_blocks = _split(grid.dims, max(1, workers))
    ranges = [(a * grid.dims, b * grid.dims) for a, b in row_blocks]

    def run(bounds):
        kernels.welford_cells(z, cell, bounds[0], bounds[1], count, mean, m2, zmin, zmax)

    if len(ranges) == 1:
        run(ranges[0])
    else:
        with ThreadPoolExecutor(max_workers=len(ranges)) as pool:
            list(pool.map(run, ranges))

    shape = grid.shape
    empty = count == 0
    grid.layers["count"] = count.reshape(shape)
    grid.layers["mean_z"] = np.where(empty, np.nan, mean).reshape(shape)
    grid.layers["min_z"] = np.where(empty, np.nan, zmin).reshape(shape)
    grid.layers["max_z"] = np.where(empty, np.nan, zmax).reshape(shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        var = np.where(count > 1, m2 / count, 0.0)
    grid.layers["variance"] = var.reshape(shape)
    grid.layers["hits"] += grid.layers["count"]
    grid.layers["ground_flag"] = np.zeros(shape, dtype=np.int8)
    return int(proj.inside.size - np.count_nonzero(proj.inside))
