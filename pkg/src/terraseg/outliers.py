"""Line-of-sight rejection of returns that lie below the known terrain."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import kernels
from .config import Config
from .grid import GridMap, Projection
from .kitti import PointCloud

# relative slack on the trust threshold; a 5x5 window of 0.05 sums to 1.25 only up to rounding
_TRUST_RTOL = 1e-9


def trusted_cells(grid: GridMap, cfg: Config) -> np.ndarray:
    """Cells whose 5x5 confidence sum reaches ``o_minc``."""
    conf_sum = grid.box_sum("confidence", 2)
    return (conf_sum >= cfg.o_minc * (1.0 - _TRUST_RTOL)).astype(np.uint8)


def block_maxima(g: np.ndarray, trusted: np.ndarray, block: int = kernels.BLOCK) -> np.ndarray:
    """Highest trusted elevation per ``block x block`` tile, ``-inf`` if none."""
    n0, n1 = g.shape
    b0, b1 = -(-n0 // block), -(-n1 // block)
    padded = np.full((b0 * block, b1 * block), -np.inf)
    padded[:n0, :n1] = np.where(trusted != 0, g, -np.inf)
    return np.ascontiguousarray(padded.reshape(b0, block, b1, block).max(axis=(1, 3)))


def filter_outliers(cloud: PointCloud, grid: GridMap, cfg: Config,
                    proj: Projection | None = None) -> tuple[PointCloud, np.ndarray]:
    """Mark points hidden below trusted terrain.

    The planar segment from the sensor to each point is walked cell by cell.
    A point is an outlier when some trusted cell on that walk, including the
    point's own cell, is higher than the ray at the midpoint of the traversed
    segment by more than ``o_t``.

    ``proj`` may carry the cloud's precomputed grid projection.

    Returns the kept cloud and a boolean outlier mask aligned with the input.
    """
    n = len(cloud)
    mask = np.zeros(n, dtype=np.uint8)
    trusted = trusted_cells(grid, cfg)
    if n and trusted.any():
        xyz = cloud.xyz
        if proj is None:
            proj = grid.project(xyz[:, 0], xyz[:, 1])
        pu, pv = proj.u, proj.v
        pz = np.ascontiguousarray(xyz[:, 2], dtype=np.float64)
        su, sv = grid.to_grid_units(cloud.sensor_origin[0], cloud.sensor_origin[1])
        sz = float(cloud.sensor_origin[2])
        g = np.ascontiguousarray(grid.elevation)
        bmax = block_maxima(g, trusted)

        def run(bounds):
            kernels.occlusion_mask(float(su), float(sv), sz, pu, pv, pz, g, trusted, bmax,
                                   float(cfg.o_t), mask, bounds[0], bounds[1])

        chunks = _chunks(n, cfg.worker_count)
        if len(chunks) == 1:
            run(chunks[0])
        else:
            with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
                list(pool.map(run, chunks))
    outlier = mask.astype(bool)
    kept = PointCloud(cloud.points[~outlier], cloud.sensor_origin, cloud.frame_id, cloud.dropped)
    return kept, outlier


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, max(1, workers) + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a] or [(0, n)]
