"""Per-point ground / non-ground labels from the final elevation map."""
from __future__ import annotations

import numpy as np

from .config import Config
from .grid import CELL_GROUND, GridMap, Projection
from .kitti import PointCloud

NON_GROUND = 0
GROUND = 1
OUTLIER = 2


def segment(cloud: PointCloud, grid: GridMap, outliers: np.ndarray | None, cfg: Config,
            proj: Projection | None = None) -> np.ndarray:
    """Label each point ``GROUND``, ``NON_GROUND`` or ``OUTLIER``.

    A point is ground when it rises at most ``h_g`` above its cell's
    elevation in ground cells, or at most ``h_o`` elsewhere. Points below the
    terrain count as ground; points outside the map are non-ground.
    """
    n = len(cloud)
    labels = np.full(n, NON_GROUND, dtype=np.uint8)
    if n == 0:
        return labels
    xyz = cloud.xyz
    if proj is None:
        proj = grid.project(xyz[:, 0], xyz[:, 1])
    at = np.flatnonzero(proj.inside)
    cells = proj.flat[at]
    dz = xyz[at, 2] - grid.elevation.ravel()[cells]
    tol = np.where(grid.layers["ground_flag"].ravel()[cells] == CELL_GROUND, cfg.h_g, cfg.h_o)
    labels[at[dz <= tol]] = GROUND
    if outliers is not None:
        labels[np.asarray(outliers, dtype=bool)] = OUTLIER
    return labels


def to_semantic(labels: np.ndarray, cfg: Config) -> np.ndarray:
    """Map pipeline labels to the 32-bit ``.label`` semantic codes."""
    codes = np.array([cfg.label_nonground, cfg.label_ground, cfg.label_outlier], dtype=np.uint32)
    return codes[labels]
