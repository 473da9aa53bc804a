"""Vehicle-centered multi-layer grid map.

Layers are ``(dims, dims)`` arrays indexed ``[i, j]`` with row ``i`` along the
world y axis and column ``j`` along the world x axis. The map center always
sits on a world-fixed lattice of cell size ``resolution`` so that recentering
moves persistent layers by whole cells without resampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, NamedTuple

import numpy as np

from . import kernels

# values of the ``ground_flag`` layer
CELL_UNKNOWN = 0
CELL_GROUND = 1
CELL_OBSTACLE = 2

FRAME_LAYERS = ("count", "min_z", "mean_z", "max_z", "variance", "ground_flag")
PERSISTENT_LAYERS = ("elevation", "confidence", "hits")


class CellIndex(NamedTuple):
    i: int
    j: int
    in_bounds: bool


@dataclass
class Projection:
    """Points expressed in the grid: continuous ``(u, v)``, cell ``(i, j)``,
    in-map flag and flat cell index (``-1`` outside)."""

    u: np.ndarray
    v: np.ndarray
    i: np.ndarray
    j: np.ndarray
    inside: np.ndarray
    flat: np.ndarray

    def subset(self, keep: np.ndarray) -> "Projection":
        return Projection(*(a[keep] for a in (self.u, self.v, self.i, self.j, self.inside, self.flat)))


class GridMap:
    """Square raster of per-frame statistics and persistent terrain layers.

    Args:
        resolution: Cell edge length in meters.
        dims: Cells per side; must be odd so a unique center cell exists.
        center: World xy of the map center. It also anchors the cell lattice.
        elevation: Initial value of the elevation layer.
    """

    def __init__(self, resolution: float, dims: int, center=(0.0, 0.0), elevation: float = 0.0):
        if not resolution > 0:
            raise ValueError(f"resolution must be > 0, got {resolution!r}")
        if dims < 1 or dims % 2 == 0:
            raise ValueError(f"dims must be a positive odd integer, got {dims!r}")
        self.resolution = float(resolution)
        self.dims = int(dims)
        self.anchor = np.array(center, dtype=np.float64)
        self.offset = np.zeros(2, dtype=np.int64)  # lattice steps (x, y) from anchor
        shape = (self.dims, self.dims)
        self.layers: dict[str, np.ndarray] = {
            "elevation": np.full(shape, float(elevation)),
            "confidence": np.zeros(shape),
            "hits": np.zeros(shape, dtype=np.int64),
        }
        self.clear_frame()

    @property
    def center(self) -> np.ndarray:
        return self.anchor + self.offset * self.resolution

    @property
    def origin(self) -> np.ndarray:
        """World xy of the outer corner of cell (0, 0)."""
        return self.center - 0.5 * self.dims * self.resolution

    @property
    def shape(self) -> tuple[int, int]:
        return (self.dims, self.dims)

    @property
    def elevation(self) -> np.ndarray:
        return self.layers["elevation"]

    @property
    def confidence(self) -> np.ndarray:
        return self.layers["confidence"]

    def clear_frame(self) -> None:
        if "count" not in self.layers:
            shape = self.shape
            self.layers["count"] = np.zeros(shape, dtype=np.int64)
            for name in ("min_z", "mean_z", "max_z", "variance"):
                self.layers[name] = np.empty(shape)
            self.layers["ground_flag"] = np.zeros(shape, dtype=np.int8)
        self.layers["count"].fill(0)
        for name in ("min_z", "mean_z", "max_z"):
            self.layers[name].fill(np.nan)
        self.layers["variance"].fill(0.0)
        self.layers["ground_flag"].fill(0)

    def copy(self) -> "GridMap":
        other = GridMap.__new__(GridMap)
        other.resolution = self.resolution
        other.dims = self.dims
        other.anchor = self.anchor.copy()
        other.offset = self.offset.copy()
        other.layers = {k: v.copy() for k, v in self.layers.items()}
        return other

    # -- indexing ---------------------------------------------------------

    def to_grid_units(self, x, y):
        """Continuous grid coordinates ``(u, v)``: cell ``[i, j]`` spans
        ``u in [j, j+1)``, ``v in [i, i+1)``."""
        ox, oy = self.origin
        return (np.asarray(x, dtype=np.float64) - ox) / self.resolution, \
               (np.asarray(y, dtype=np.float64) - oy) / self.resolution

    def project(self, x, y) -> Projection:
        u, v = self.to_grid_units(x, y)
        u = np.ascontiguousarray(u)
        v = np.ascontiguousarray(v)
        j = np.floor(u).astype(np.int64)
        i = np.floor(v).astype(np.int64)
        inside = (i >= 0) & (i < self.dims) & (j >= 0) & (j < self.dims)
        flat = np.where(inside, i * self.dims + j, -1)
        return Projection(u, v, i, j, inside, flat)

    def locate(self, x, y):
        """Vectorized cell lookup. Returns ``(i, j, inside)`` arrays."""
        p = self.project(x, y)
        return p.i, p.j, p.inside

    def world_to_cell(self, xy) -> CellIndex:
        u, v = self.to_grid_units(float(xy[0]), float(xy[1]))
        i, j = math.floor(v), math.floor(u)
        return CellIndex(i, j, 0 <= i < self.dims and 0 <= j < self.dims)

    def cell_to_world(self, i, j) -> np.ndarray:
        ox, oy = self.origin
        x = ox + (np.asarray(j, dtype=np.float64) + 0.5) * self.resolution
        y = oy + (np.asarray(i, dtype=np.float64) + 0.5) * self.resolution
        return np.stack([x, y], axis=-1)

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """World x and y of every cell center as two ``(dims, dims)`` arrays."""
        ox, oy = self.origin
        coords = (np.arange(self.dims) + 0.5) * self.resolution
        xs = ox + coords
        ys = oy + coords
        return np.broadcast_to(xs[None, :], self.shape), np.broadcast_to(ys[:, None], self.shape)

    # -- motion -----------------------------------------------------------

    def recenter(self, new_center) -> "GridMap":
        """Move the map to the lattice point nearest ``new_center``.

        Persistent layers stay world-anchored. Cells that scroll into view get
        zero confidence and the elevation of the nearest previously covered
        cell. Per-frame layers are cleared. Returns ``self``.
        """
        shift = np.rint((np.asarray(new_center, dtype=np.float64) - self.center)
                        / self.resolution).astype(np.int64)
        sj, si = int(shift[0]), int(shift[1])
        if sj or si:
            n = self.dims
            rows = np.arange(n) + si
            cols = np.arange(n) + sj
            row_ok = (rows >= 0) & (rows < n)
            col_ok = (cols >= 0) & (cols < n)
            gather = np.ix_(np.clip(rows, 0, n - 1), np.clip(cols, 0, n - 1))
            covered = row_ok[:, None] & col_ok[None, :]
            self.layers["elevation"] = self.layers["elevation"][gather]
            self.layers["confidence"] = np.where(covered, self.layers["confidence"][gather], 0.0)
            self.layers["hits"] = np.where(covered, self.layers["hits"][gather], 0)
            self.offset += shift
        self.clear_frame()
        return self

    # -- neighborhoods ----------------------------------------------------

    def patch_sums(self, center: tuple[int, int], k: int, layers: Iterable[str]):
        """Sum each named layer over the ``k x k`` window around ``center``.

        The window is clipped at the map border. Returns ``(sums, n_cells)``
        where ``n_cells`` counts the in-bounds cells that contributed.
        """
        if k < 1 or k % 2 == 0:
            raise ValueError(f"patch size must be odd, got {k!r}")
        r = k // 2
        i, j = center
        i0, i1 = max(i - r, 0), min(i + r + 1, self.dims)
        j0, j1 = max(j - r, 0), min(j + r + 1, self.dims)
        sums = {name: float(self.layers[name][i0:i1, j0:j1].sum()) for name in layers}
        return sums, max(i1 - i0, 0) * max(j1 - j0, 0)

    def window_sums(self, a, b, cells: np.ndarray, radius: np.ndarray):
        """Clipped window sums of arrays ``a`` and ``b`` around flat cell
        indices ``cells`` with per-cell radius; row-major summation order."""
        cells = np.ascontiguousarray(cells, dtype=np.int64)
        out_a = np.empty(cells.size)
        out_b = np.empty(cells.size)
        kernels.window_sums(np.ascontiguousarray(a, dtype=np.float64),
                            np.ascontiguousarray(b, dtype=np.float64),
                            cells, np.ascontiguousarray(radius, dtype=np.int64), out_a, out_b)
        return out_a, out_b

    def box_sum(self, layer, r: int) -> np.ndarray:
        """Clipped window sum of radius ``r`` for every cell at once."""
        a = self.layers[layer] if isinstance(layer, str) else layer
        return kernels.box_sum(np.ascontiguousarray(a, dtype=np.float64), r)

    def spiral_indices(self, start: tuple[int, int]) -> np.ndarray:
        return spiral_indices(self.dims, start)


@lru_cache(maxsize=16)
def _spiral(n_rows: int, n_cols: int, i0: int, j0: int) -> np.ndarray:
    if not (0 <= i0 < n_rows and 0 <= j0 < n_cols):
        raise ValueError(f"start ({i0}, {j0}) outside a {n_rows}x{n_cols} map")
    rings = [np.array([[i0, j0]], dtype=np.int64)]
    max_r = max(i0, j0, n_rows - 1 - i0, n_cols - 1 - j0)
    for r in range(1, max_r + 1):
        top, bottom, left, right = i0 - r, i0 + r, j0 - r, j0 + r
        span = np.arange(-r, r + 1)
        inner = np.arange(-r + 1, r + 1)
        parts = [
            np.stack([np.full(2 * r + 1, top), j0 + span], axis=1),
            np.stack([i0 + inner, np.full(2 * r, right)], axis=1),
            np.stack([np.full(2 * r, bottom), j0 - inner], axis=1),
            np.stack([i0 - inner[:-1], np.full(2 * r - 1, left)], axis=1),
        ]
        ring = np.concatenate(parts)
        ok = (ring[:, 0] >= 0) & (ring[:, 0] < n_rows) & (ring[:, 1] >= 0) & (ring[:, 1] < n_cols)
        rings.append(ring[ok])
    out = np.concatenate(rings)
    out.setflags(write=False)
    return out


def spiral_indices(dims: int, start: tuple[int, int]) -> np.ndarray:
    """All cells of a ``dims x dims`` map as an ``(n, 2)`` array of ``(i, j)``.

    Order is ring by ring in Chebyshev distance from ``start``; within a ring
    the walk is clockwise starting at the ring's ``(i-r, j-r)`` corner. Rings
    are clipped to the map.
    """
    return _spiral(int(dims), int(dims), int(start[0]), int(start[1]))


@lru_cache(maxsize=16)
def spiral_order(dims: int, start: tuple[int, int]) -> np.ndarray:
    """:func:`spiral_indices` as flat ``i * dims + j`` offsets."""
    cells = spiral_indices(dims, start)
    flat = np.ascontiguousarray(cells[:, 0] * dims + cells[:, 1], dtype=np.int64)
    flat.setflags(write=False)
    return flat
