"""Spiral propagation of terrain into cells without a ground detection."""
from __future__ import annotations

import numpy as np

from . import kernels
from .config import Config
from .grid import CELL_GROUND, GridMap, spiral_order


def interpolate(grid: GridMap, cfg: Config, sensor_xy) -> None:
    """Blend every non-ground cell with its confidence-weighted 3x3 neighborhood.

    Cells are visited outward from the sensor cell and updated in place, so
    terrain settled near the sensor feeds cells further out within the same
    pass. Each visited cell then loses ``1/theta`` of its confidence. A
    neighborhood with zero total confidence leaves the elevation unchanged.
    """
    start = grid.world_to_cell(sensor_xy)
    if not start.in_bounds:
        raise ValueError(f"sensor at {tuple(sensor_xy)} lies outside the map")
    g = np.ascontiguousarray(grid.layers["elevation"])
    c = np.ascontiguousarray(grid.layers["confidence"])
    skip = np.ascontiguousarray(grid.layers["ground_flag"] == CELL_GROUND, dtype=np.int8)
    order = spiral_order(grid.dims, (start.i, start.j))
    kernels.spiral_interpolate(g, c, skip, order, float(cfg.theta))
    grid.layers["elevation"] = g
    grid.layers["confidence"] = c
