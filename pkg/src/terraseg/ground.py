"""Ground-cell classification and elevation/confidence fusion."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import Config
from .grid import CELL_GROUND, CELL_OBSTACLE, CELL_UNKNOWN, GridMap


def variance_threshold(d, cfg: Config):
    """Largest z variance a ground cell may have at planar distance ``d``."""
    return np.maximum(cfg.d_sf * np.asarray(d, dtype=np.float64), cfg.t_minv)


def expected_points(d, cfg: Config):
    """Returns one beam ring is expected to leave in a cell at distance ``d``.

    The cell subtends ``atan(R / d)`` of the ring; dividing by the angular
    point spacing gives the count. ``d == 0`` yields ``inf``.
    """
    d = np.asarray(d, dtype=np.float64)
    with np.errstate(divide="ignore"):
        n = np.degrees(np.arctan(cfg.resolution / d)) / cfg.d_pv
    return np.where(d > 0, n, np.inf)


def cell_ground_height(counts, minima):
    """Point-count weighted mean of the patch minima, or ``None`` if the patch is empty."""
    p = np.asarray(counts, dtype=np.float64)
    total = p.sum()
    if total <= 0:
        return None
    m = np.where(p > 0, np.asarray(minima, dtype=np.float64), 0.0)
    return float((p * m).sum() / total)


def cell_confidence(counts, cfg: Config) -> float:
    return float(np.clip(np.sum(counts) / cfg.s, 0.0, 1.0))


@dataclass
class GroundEstimate:
    """Current-frame elevation ``h`` and confidence ``q`` for every cell."""

    h: np.ndarray
    q: np.ndarray
    is_ground: np.ndarray
    is_obstacle: np.ndarray


def cell_distances(grid: GridMap, sensor_xy, cells: np.ndarray | None = None) -> np.ndarray:
    """Planar distance from the sensor to cell centers (all cells, or the flat
    indices ``cells``)."""
    if cells is None:
        xs, ys = grid.cell_centers()
    else:
        i, j = np.divmod(np.asarray(cells, dtype=np.int64), grid.dims)
        x0, y0 = grid.origin
        xs = x0 + (j + 0.5) * grid.resolution
        ys = y0 + (i + 0.5) * grid.resolution
    return np.hypot(xs - sensor_xy[0], ys - sensor_xy[1])


def _patch_radius(d, cfg: Config) -> np.ndarray:
    # 3x3 patch near the sensor, 5x5 beyond d_ps
    return np.where(np.asarray(d) < cfg.d_ps, 1, 2).astype(np.int64)


def classify_cells(grid: GridMap, cfg: Config, sensor_xy) -> np.ndarray:
    """Write and return the ``ground_flag`` layer.

    A cell is classified only if it holds at least ``g_minp`` of its expected
    point count. Dense cells (``count >= v_np``) test their own variance;
    sparse ones use the mean variance of patch cells holding two or more
    points. Cells whose patch has no such cell stay unknown.
    """
    count = grid.layers["count"]
    var = grid.layers["variance"]
    flat_count = count.ravel()
    cells = np.flatnonzero(flat_count >= 1)
    d = cell_distances(grid, sensor_xy, cells)
    cnt = flat_count[cells]
    n_exp = expected_points(d, cfg)
    gated = np.isinf(n_exp) | (cnt >= cfg.g_minp * n_exp)
    cells, d, cnt = cells[gated], d[gated], cnt[gated]

    has_var = (count >= 2).astype(np.float64)
    var_sum, n_var = grid.window_sums(var * has_var, has_var, cells, _patch_radius(d, cfg))
    own = cnt >= cfg.v_np
    with np.errstate(invalid="ignore", divide="ignore"):
        tested = np.where(own, var.ravel()[cells], var_sum / n_var)
    defined = own | (n_var > 0)
    below = tested < variance_threshold(d, cfg)

    flag = np.full(grid.shape, CELL_UNKNOWN, dtype=np.int8)
    flat = flag.ravel()
    flat[cells[defined & below]] = CELL_GROUND
    flat[cells[defined & ~below]] = CELL_OBSTACLE
    grid.layers["ground_flag"] = flag
    return flag


def estimate_ground(grid: GridMap, cfg: Config, sensor_xy) -> GroundEstimate:
    """Patch-weighted minimum height and count-based confidence per cell.

    Only classified cells are evaluated; the rest get ``h = nan`` and
    ``q = 0`` since fusion never reads them.
    """
    count = grid.layers["count"].astype(np.float64)
    minima = np.where(count > 0, grid.layers["min_z"], 0.0)
    flag = grid.layers["ground_flag"]
    cells = np.flatnonzero(flag.ravel() != CELL_UNKNOWN)
    d = cell_distances(grid, sensor_xy, cells)
    num, p_sum = grid.window_sums(count * minima, count, cells, _patch_radius(d, cfg))
    h = np.full(grid.shape, np.nan)
    q = np.zeros(grid.shape)
    with np.errstate(invalid="ignore", divide="ignore"):
        h.ravel()[cells] = np.where(p_sum > 0, num / p_sum, np.nan)
    q.ravel()[cells] = np.clip(p_sum / cfg.s, 0.0, 1.0)
    return GroundEstimate(h, q, flag == CELL_GROUND, flag == CELL_OBSTACLE)


def fuse(grid: GridMap, est: GroundEstimate) -> None:
    """Fold the current estimate into the persistent elevation and confidence.

    Ground cells take the confidence-weighted mean of old and new elevation
    and move their confidence halfway to ``q / 2``. Obstacle cells may only
    lower the elevation, with a small confidence bump capped at 0.5.
    """
    g = grid.layers["elevation"]
    c = grid.layers["confidence"]
    g_new = g.copy()
    c_new = c.copy()

    w = est.q + c
    upd = est.is_ground & (w > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        g_new[upd] = ((est.q * est.h + c * g) / w)[upd]
    c_new[est.is_ground] = (0.5 * (est.q / 2.0 + c))[est.is_ground]

    lower = est.is_obstacle & (est.h < g)
    g_new[lower] = est.h[lower]
    c_new[lower] = np.minimum(c[lower] + 0.1, 0.5)

    grid.layers["elevation"] = g_new
    grid.layers["confidence"] = c_new
