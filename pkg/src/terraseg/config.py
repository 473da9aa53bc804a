"""Pipeline parameters and the plain-text ``key = value`` dialect they load from."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Iterator


class ConfigError(ValueError):
    """Raised for malformed or invalid configuration input."""

    def __init__(self, key: str | None, message: str, line: int | None = None):
        self.key = key
        self.line = line
        where = f"line {line}: " if line is not None else ""
        prefix = f"{key}: " if key else ""
        super().__init__(f"{where}{prefix}{message}")


def parse_key_values(text: str) -> Iterator[tuple[int, str, str]]:
    """Yield ``(line_number, key, raw_value)`` for each assignment in ``text``.

    Blank lines and ``#`` comments are skipped. Keys may repeat; callers decide
    whether repetition is meaningful.
    """
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(None, "empty key", lineno)
        yield lineno, key, value.strip()


def _parse_int_set(value: str) -> frozenset[int]:
    items = [v.strip() for v in value.replace(";", ",").split(",") if v.strip()]
    return frozenset(int(v, 0) for v in items)


# semantic ids of the SemanticKITTI schema
KITTI_GROUND_IDS = frozenset({40, 44, 48, 49, 60, 72})  # road parking sidewalk other-ground lane-marking terrain
KITTI_IGNORE_IDS = frozenset({0, 1, 70})  # unlabeled outlier vegetation


@dataclass(frozen=True)
class Config:
    """All tunable parameters of the segmentation pipeline.

    Attributes:
        resolution: Cell edge length in meters.
        d_sf: Distance scaling factor of the variance threshold (m^2 per m).
        t_minv: Floor of the variance threshold; defaults to ``5 * d_sf``.
        theta: Confidence decay factor of the interpolation step.
        g_minp: Fraction of the expected point count a cell needs to be classified.
        o_minc: Minimum 5x5 confidence sum for a cell to be trusted by the outlier filter.
        h_g: Height tolerance above terrain for points in ground cells.
        h_o: Height tolerance above terrain for points in all other cells.
        s: Point count that yields full confidence for one detection.
        o_t: Occlusion tolerance of the outlier filter in meters.
        d_ps: Distance at which patches grow from 3x3 to 5x5.
        d_pv: Angular spacing of sensor returns, degrees.
        v_np: Minimum point count for a cell to use its own variance.
        sensor_height: Mount height used to initialize the map elevation.
        dims: Cells per map side (odd).
        worker_count: Intra-frame worker threads.
    """

    resolution: float = 0.33
    d_sf: float = 1e-5
    t_minv: float | None = None
    theta: float = 5.0
    g_minp: float = 0.25
    o_minc: float = 1.25
    h_g: float = 0.3
    h_o: float = 0.1
    s: float = 20.0
    o_t: float = 0.1
    d_ps: float = 20.0
    d_pv: float = 0.4
    v_np: int = 10
    sensor_height: float = 1.73
    dims: int = 361
    worker_count: int = 1
    label_ground: int = 40
    label_nonground: int = 1
    label_outlier: int = 1
    ground_ids: frozenset[int] = field(default=KITTI_GROUND_IDS)
    ignore_ids: frozenset[int] = field(default=KITTI_IGNORE_IDS)

    def __post_init__(self) -> None:
        if self.t_minv is None:
            object.__setattr__(self, "t_minv", 5.0 * self.d_sf)
        self.validate()

    def validate(self) -> None:
        positive = ("resolution", "d_sf", "t_minv", "theta", "g_minp", "o_minc",
                    "h_g", "h_o", "s", "o_t", "d_ps", "d_pv", "v_np", "dims", "worker_count")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(name, f"must be > 0, got {getattr(self, name)!r}")
        if self.sensor_height < 0:
            raise ConfigError("sensor_height", "must be >= 0")
        if self.g_minp > 1:
            raise ConfigError("g_minp", f"must lie in (0, 1], got {self.g_minp!r}")
        if not self.theta > 1:
            raise ConfigError("theta", f"must be > 1, got {self.theta!r}")
        if self.h_o > self.h_g:
            raise ConfigError("h_o", f"must not exceed h_g ({self.h_o!r} > {self.h_g!r})")
        if self.dims % 2 == 0:
            raise ConfigError("dims", f"must be odd, got {self.dims!r}")
        if self.ground_ids & self.ignore_ids:
            raise ConfigError("ignore_ids", "overlaps ground_ids")

    def replace(self, **changes: Any) -> "Config":
        if "d_sf" in changes and "t_minv" not in changes:
            changes["t_minv"] = None
        return dataclasses.replace(self, **changes)


_ALIASES = {"R": "resolution", "workers": "worker_count"}

_PARSERS: dict[str, Any] = {
    "v_np": int,
    "dims": int,
    "worker_count": int,
    "label_ground": int,
    "label_nonground": int,
    "label_outlier": int,
    "ground_ids": _parse_int_set,
    "ignore_ids": _parse_int_set,
}


def load_config(text: str) -> Config:
    """Parse ``key = value`` lines into a :class:`Config`.

    Unknown keys, duplicate keys, unparsable values and invariant violations
    raise :class:`ConfigError` naming the offending key.
    """
    known = {f.name for f in dataclasses.fields(Config)}
    values: dict[str, Any] = {}
    for lineno, key, raw in parse_key_values(text):
        name = _ALIASES.get(key, key)
        if name not in known:
            raise ConfigError(key, "unknown key", lineno)
        if name in values:
            raise ConfigError(key, "given more than once", lineno)
        try:
            values[name] = _PARSERS.get(name, float)(raw)
        except ValueError as exc:
            raise ConfigError(key, f"cannot parse {raw!r} ({exc})", lineno) from None
    return Config(**values)


def dump_config(cfg: Config) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, frozenset):
            value = ", ".join(str(v) for v in sorted(value))
        lines.append(f"{f.name} = {value}")
    return "\n".join(lines) + "\n"
