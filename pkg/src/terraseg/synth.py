"""Analytic terrain and a rotating multi-beam LiDAR model for labeled test scans."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .config import ConfigError, parse_key_values
from .kitti import PointCloud, Pose

# semantic ids written for synthetic truth
LABEL_TERRAIN = 40
LABEL_OBSTACLE = 10
LABEL_OUTLIER = 1


@dataclass(frozen=True)
class Curb:
    """Step of ``height`` at ``position`` along ``axis``; raised on the side ``direction`` points to."""

    axis: str
    position: float
    height: float
    direction: int = 1

    def offset(self, s):
        return np.where(self.direction * (s - self.position) >= 0, self.height, 0.0)

    def bounds(self):
        return min(0.0, self.height), max(0.0, self.height)


@dataclass(frozen=True)
class Ditch:
    """Raised-cosine trough of ``depth`` and full ``width`` centered at ``center``."""

    axis: str
    center: float
    depth: float
    width: float

    def offset(self, s):
        x = (s - self.center) / self.width
        inside = np.abs(x) < 0.5
        return np.where(inside, -0.5 * self.depth * (1.0 + np.cos(2.0 * np.pi * x)), 0.0)

    def bounds(self):
        return -abs(self.depth), 0.0


@dataclass(frozen=True)
class Ramp:
    """Linear rise of ``rise`` meters over ``length`` starting at ``start``."""

    axis: str
    start: float
    length: float
    rise: float

    def offset(self, s):
        return self.rise * np.clip((s - self.start) / self.length, 0.0, 1.0)

    def bounds(self):
        return min(0.0, self.rise), max(0.0, self.rise)


@dataclass(frozen=True)
class TerrainModel:
    """Inclined plane plus additive primitives. ``height`` is defined everywhere."""

    slope_pct: float = 0.0
    slope_heading_deg: float = 0.0
    z0: float = 0.0
    features: tuple = ()

    def plane(self, x, y):
        h = math.radians(self.slope_heading_deg)
        return self.z0 + self.slope_pct / 100.0 * (np.asarray(x) * math.cos(h) + np.asarray(y) * math.sin(h))

    def relief(self, x, y):
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        for f in self.features:
            out = out + f.offset(np.asarray(x) if f.axis == "x" else np.asarray(y))
        return out

    def height(self, x, y):
        return self.plane(x, y) + self.relief(x, y)

    def relief_bounds(self) -> tuple[float, float]:
        lo = sum(f.bounds()[0] for f in self.features)
        hi = sum(f.bounds()[1] for f in self.features)
        return lo, hi


@dataclass(frozen=True)
class Box:
    """Upright box resting on the terrain at its center, sunk 0.5 m below it."""

    x: float
    y: float
    yaw_deg: float
    length: float
    width: float
    height: float


@dataclass(frozen=True)
class SceneSpec:
    terrain: TerrainModel = field(default_factory=TerrainModel)
    obstacles: tuple = ()
    beams: int = 64
    elev_min_deg: float = -24.9
    elev_max_deg: float = 2.0
    azimuth_step_deg: float = 0.4
    mount_height: float = 1.73
    noise_sigma: float = 0.02
    outlier_rate: float = 0.0
    outlier_depth_min: float = 1.0
    outlier_depth_max: float = 2.0
    max_range: float = 120.0
    ground_max_range: float = 50.0  # low-reflectivity pavement returns fade earlier
    seed: int = 0

    def __post_init__(self) -> None:
        steps = 360.0 / self.azimuth_step_deg
        if self.azimuth_step_deg <= 0 or abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"azimuth step {self.azimuth_step_deg} does not divide 360 degrees")
        if self.beams < 0:
            raise ValueError("beams must be >= 0")
        if not 0 <= self.outlier_rate < 1:
            raise ValueError("outlier_rate must lie in [0, 1)")
        if not 0 < self.outlier_depth_min <= self.outlier_depth_max:
            raise ValueError("outlier depths must satisfy 0 < min <= max")

    def elevations(self) -> np.ndarray:
        if self.beams == 1:
            return np.array([math.radians(self.elev_min_deg)])
        return np.radians(np.linspace(self.elev_min_deg, self.elev_max_deg, self.beams))

    def azimuths(self) -> np.ndarray:
        n = int(round(360.0 / self.azimuth_step_deg))
        return np.radians(np.arange(n) * self.azimuth_step_deg)


class Scan(NamedTuple):
    cloud: PointCloud  # sensor frame
    labels: np.ndarray  # semantic ids
    true_z: np.ndarray  # sensor-frame z before outlier lowering


# -- ray casting -------------------------------------------------------------

def _terrain_hits(terrain: TerrainModel, origin, dirs, t_max, samples=24, iters=48):
    """First ray parameter where each ray meets the terrain, ``inf`` if none within ``t_max``."""
    ox, oy, oz = origin
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    # ray height above the base plane is linear: a + b t
    a = oz - terrain.plane(ox, oy)
    b = dz - (terrain.plane(ox + dx, oy + dy) - terrain.plane(ox, oy))
    lo, hi = terrain.relief_bounds()
    t = np.full(dirs.shape[0], np.inf)
    falling = b < 0
    if not falling.any():
        return t
    with np.errstate(divide="ignore", invalid="ignore"):
        t_in = np.where(falling, (hi - a) / b, np.inf)
        t_out = np.where(falling, (lo - a) / b, np.inf)
    t_in = np.maximum(t_in, 0.0)
    if hi == lo:
        hit = falling & (t_out <= t_max)
        t[hit] = t_out[hit]
        return t
    cand = np.flatnonzero(falling & (t_in <= t_max))
    if cand.size == 0:
        return t
    t0, t1 = t_in[cand], np.minimum(t_out[cand], t_max)
    cx, cy, cz = dx[cand], dy[cand], dz[cand]

    def gap(tt):
        return oz + tt * cz[:, None] - terrain.height(ox + tt * cx[:, None], oy + tt * cy[:, None])

    frac = np.linspace(0.0, 1.0, samples + 1)
    ts = t0[:, None] + (t1 - t0)[:, None] * frac[None, :]
    f = gap(ts) if ts.size else ts
    below = f <= 0
    found = below.any(axis=1)
    first = np.argmax(below, axis=1)
    rows = np.flatnonzero(found & (first > 0))
    direct = np.flatnonzero(found & (first == 0))
    lo_t = ts[rows, first[rows] - 1]
    hi_t = ts[rows, first[rows]]
    sub = rows
    for _ in range(iters):
        mid = 0.5 * (lo_t + hi_t)
        fm = oz + mid * cz[sub] - terrain.height(ox + mid * cx[sub], oy + mid * cy[sub])
        neg = fm <= 0
        hi_t = np.where(neg, mid, hi_t)
        lo_t = np.where(neg, lo_t, mid)
    t[cand[rows]] = hi_t
    t[cand[direct]] = ts[direct, 0]
    return t


def _box_hits(box: Box, terrain: TerrainModel, origin, dirs):
    base = float(terrain.height(box.x, box.y))
    yaw = math.radians(box.yaw_deg)
    c, s = math.cos(yaw), math.sin(yaw)
    # ray in box frame
    rx, ry = origin[0] - box.x, origin[1] - box.y
    o = np.array([c * rx + s * ry, -s * rx + c * ry, origin[2] - base])
    d = np.stack([c * dirs[:, 0] + s * dirs[:, 1], -s * dirs[:, 0] + c * dirs[:, 1], dirs[:, 2]], axis=1)
    lo = np.array([-box.length / 2, -box.width / 2, -0.5])
    hi = np.array([box.length / 2, box.width / 2, box.height])
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    tmin = np.fmin(t1, t2)
    tmax = np.fmax(t1, t2)
    # axis-parallel rays: inside the slab means unbounded, outside means miss
    par = d == 0
    inside = (o >= lo) & (o <= hi)
    tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
    tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
    t_enter = tmin.max(axis=1)
    t_exit = tmax.min(axis=1)
    hit = (t_enter <= t_exit) & (t_enter > 0)
    return np.where(hit, t_enter, np.inf)


def generate_scan(spec: SceneSpec, pose: Pose, frame: int = 0) -> Scan:
    """Cast every beam of one revolution from ``pose`` into the scene.

    Closest hit wins. Terrain hits are labeled ground, box hits obstacle.
    With ``outlier_rate > 0`` that fraction of all returns is taken from
    the ground returns and pushed straight down, mimicking multi-path
    reflections; those points are labeled outlier.
    """
    rng = np.random.default_rng([spec.seed, frame])
    elev = spec.elevations()
    azim = spec.azimuths()
    if elev.size == 0:
        empty = PointCloud(np.zeros((0, 4)), np.zeros(3), frame)
        return Scan(empty, np.zeros(0, dtype=np.uint32), np.zeros(0))
    ee, aa = np.meshgrid(elev, azim, indexing="ij")
    local = np.stack([np.cos(ee) * np.cos(aa), np.cos(ee) * np.sin(aa), np.sin(ee)], axis=-1).reshape(-1, 3)
    dirs = local @ pose.rotation.T
    origin = pose.translation

    t_ground = _terrain_hits(spec.terrain, origin, dirs, spec.ground_max_range)
    t_box = np.full(dirs.shape[0], np.inf)
    for box in spec.obstacles:
        t_box = np.minimum(t_box, _box_hits(box, spec.terrain, origin, dirs))
    t_box[t_box > spec.max_range] = np.inf
    # a box behind the terrain hit is occluded; a terrain hit beyond the
    # pavement range still blocks boxes behind it
    t_terrain_any = _terrain_hits(spec.terrain, origin, dirs, spec.max_range) if spec.obstacles else t_ground
    box_first = t_box < t_terrain_any
    t = np.where(box_first, t_box, t_ground)
    valid = np.isfinite(t)
    is_box = box_first[valid]
    rng_t = t[valid]
    if spec.noise_sigma > 0:
        rng_t = rng_t + rng.normal(0.0, spec.noise_sigma, rng_t.shape)
    local_pts = local[valid] * rng_t[:, None]

    labels = np.where(is_box, LABEL_OBSTACLE, LABEL_TERRAIN).astype(np.uint32)
    true_z = local_pts[:, 2].copy()
    n = local_pts.shape[0]
    n_out = int(round(spec.outlier_rate * n))
    ground_idx = np.flatnonzero(~is_box)
    if n_out:
        pick = np.sort(rng.choice(ground_idx, size=min(n_out, ground_idx.size), replace=False))
        depth = rng.uniform(spec.outlier_depth_min, spec.outlier_depth_max, pick.size)
        # lowered along world z, expressed in the sensor frame
        local_pts[pick] -= depth[:, None] * pose.rotation[2][None, :]
        labels[pick] = LABEL_OUTLIER
    pts = np.zeros((n, 4))
    pts[:, :3] = local_pts
    pts[:, 3] = 0.5
    return Scan(PointCloud(pts, np.zeros(3), frame), labels, true_z)


def truth_height_field(terrain: TerrainModel, xs, ys) -> np.ndarray:
    """Exact terrain heights at the given world coordinates (e.g. cell centers)."""
    return np.asarray(terrain.height(xs, ys), dtype=np.float64)


def drive(spec: SceneSpec, frames: int, speed: float = 1.0, heading_deg: float = 0.0,
          start=(0.0, 0.0)) -> list[Pose]:
    """Sensor poses for a straight drive, ``speed`` meters per frame, following the terrain."""
    h = math.radians(heading_deg)
    c, s = math.cos(h), math.sin(h)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    poses = []
    for k in range(frames):
        x = start[0] + k * speed * c
        y = start[1] + k * speed * s
        z = float(spec.terrain.height(x, y)) + spec.mount_height
        poses.append(Pose(rot, np.array([x, y, z])))
    return poses


# -- presets -----------------------------------------------------------------

def flat_scene(seed: int = 0, **overrides) -> SceneSpec:
    """Flat road lined with eight box obstacles taller than the sensor."""
    boxes = (
        Box(8.0, 5.0, 0.0, 4.5, 2.0, 2.2),
        Box(15.0, -6.0, 10.0, 5.0, 2.2, 2.6),
        Box(22.0, 4.5, -5.0, 4.0, 1.9, 2.1),
        Box(30.0, -5.0, 0.0, 8.0, 2.5, 3.0),
        Box(38.0, 7.0, 30.0, 3.0, 3.0, 2.4),
        Box(46.0, -4.5, 0.0, 4.5, 2.0, 2.3),
        Box(57.0, 6.0, 45.0, 6.0, 2.4, 2.8),
        Box(66.0, -7.0, 0.0, 4.0, 2.0, 2.2),
    )
    return SceneSpec(terrain=TerrainModel(), obstacles=boxes, seed=seed, **overrides)


def sloped_scene(seed: int = 0, **overrides) -> SceneSpec:
    """9.2 % incline along x with raised sidewalks behind 15 cm curbs and a roadside ditch."""
    terrain = TerrainModel(
        slope_pct=9.2,
        features=(
            Curb("y", 4.0, 0.15, +1),
            Curb("y", -4.0, 0.15, -1),
            Ditch("y", -9.0, 0.5, 3.0),
        ),
    )
    return SceneSpec(terrain=terrain, seed=seed, **overrides)


# -- text dialect --------------------------------------------------------------

_SCALARS = {
    "beams": int, "elev_min_deg": float, "elev_max_deg": float, "azimuth_step_deg": float,
    "mount_height": float, "noise_sigma": float, "outlier_rate": float,
    "outlier_depth_min": float, "outlier_depth_max": float, "max_range": float,
    "ground_max_range": float, "seed": int,
}
_TERRAIN = {"slope_pct": float, "slope_heading_deg": float, "z0": float}


def _fields(raw: str, key: str, lineno: int, n: int, axis: bool) -> tuple:
    parts = raw.replace(",", " ").split()
    if len(parts) != n:
        raise ConfigError(key, f"expected {n} values, got {len(parts)}", lineno)
    try:
        if axis:
            if parts[0] not in ("x", "y"):
                raise ValueError(f"axis must be x or y, got {parts[0]!r}")
            return (parts[0], *(float(p) for p in parts[1:]))
        return tuple(float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(key, str(exc), lineno) from None


def load_scene(text: str) -> SceneSpec:
    """Parse a scene description in the ``key = value`` dialect.

    Scalar keys are the :class:`SceneSpec` field names plus ``slope_pct``,
    ``slope_heading_deg`` and ``z0``. The repeatable keys ``curb = axis
    position height direction``, ``ditch = axis center depth width``,
    ``ramp = axis start length rise`` and ``box = x y yaw length width height``
    add primitives.
    """
    scalars, terrain, features, boxes = {}, {}, [], []
    for lineno, key, raw in parse_key_values(text):
        try:
            if key in _SCALARS:
                scalars[key] = _SCALARS[key](raw)
            elif key in _TERRAIN:
                terrain[key] = _TERRAIN[key](raw)
            elif key == "curb":
                axis, pos, height, direction = _fields(raw, key, lineno, 4, True)
                features.append(Curb(axis, pos, height, int(direction)))
            elif key == "ditch":
                features.append(Ditch(*_fields(raw, key, lineno, 4, True)))
            elif key == "ramp":
                features.append(Ramp(*_fields(raw, key, lineno, 4, True)))
            elif key == "box":
                boxes.append(Box(*_fields(raw, key, lineno, 6, False)))
            else:
                raise ConfigError(key, "unknown key", lineno)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(key, f"cannot parse {raw!r}", lineno) from None
    try:
        return SceneSpec(terrain=TerrainModel(features=tuple(features), **terrain),
                         obstacles=tuple(boxes), **scalars)
    except ValueError as exc:
        raise ConfigError(None, str(exc)) from None
