"""Per-frame orchestration of the segmentation stages."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .config import Config
from .grid import GridMap
from .ground import classify_cells, estimate_ground, fuse
from .interpolate import interpolate
from .kitti import PointCloud
from .outliers import filter_outliers
from .raster import rasterize
from .segment import segment

STAGES = ("recenter", "filter_outliers", "rasterize", "classify_cells", "fuse", "interpolate", "segment")


@dataclass
class FrameResult:
    labels: np.ndarray
    outliers: np.ndarray
    out_of_map: int
    timings_ms: dict[str, float] = field(default_factory=dict)


class Pipeline:
    """Stateful segmenter; frames must be fed in temporal order.

    The map is created on the first frame, centered on the sensor and
    initialized to the elevation ``sensor_height`` below it.
    """

    def __init__(self, cfg: Config | None = None):
        self.cfg = cfg or Config()
        self.grid: GridMap | None = None
        self.frames = 0

    def process(self, cloud: PointCloud) -> FrameResult:
        """Segment one world-frame cloud and update the terrain map."""
        cfg = self.cfg
        sensor = cloud.sensor_origin
        sensor_xy = sensor[:2]
        timings = {}
        clock = time.perf_counter

        t0 = clock()
        if self.grid is None:
            self.grid = GridMap(cfg.resolution, cfg.dims, center=sensor_xy,
                                elevation=float(sensor[2]) - cfg.sensor_height)
        grid = self.grid.recenter(sensor_xy)
        t1 = clock()
        timings["recenter"] = t1 - t0

        xyz = cloud.xyz
        proj = grid.project(xyz[:, 0], xyz[:, 1])
        kept, outliers = filter_outliers(cloud, grid, cfg, proj)
        t2 = clock()
        timings["filter_outliers"] = t2 - t1

        out_of_map = rasterize(kept, grid, cfg, proj.subset(~outliers) if outliers.any() else proj)
        t3 = clock()
        timings["rasterize"] = t3 - t2

        classify_cells(grid, cfg, sensor_xy)
        t4 = clock()
        timings["classify_cells"] = t4 - t3

        fuse(grid, estimate_ground(grid, cfg, sensor_xy))
        t5 = clock()
        timings["fuse"] = t5 - t4

        interpolate(grid, cfg, sensor_xy)
        t6 = clock()
        timings["interpolate"] = t6 - t5

        labels = segment(cloud, grid, outliers, cfg, proj)
        t7 = clock()
        timings["segment"] = t7 - t6
        timings["total"] = t7 - t0

        self.frames += 1
        return FrameResult(labels, outliers, out_of_map,
                           {k: v * 1e3 for k, v in timings.items()})
