"""Terrain map snapshots and their CSV / 16-bit PGM exports."""
from __future__ import annotations

import csv
import io

import numpy as np

from .grid import GridMap

FORMATS = ("csv", "pgm")
PGM_MAX = 65535


def save_snapshot(grid: GridMap, path) -> None:
    """Write the persistent layers and map geometry to an ``.npz`` file."""
    np.savez(
        path,
        resolution=grid.resolution,
        dims=grid.dims,
        anchor=grid.anchor,
        offset=grid.offset,
        elevation=grid.elevation,
        confidence=grid.confidence,
        hits=grid.layers["hits"],
    )


def load_snapshot(path) -> GridMap:
    with np.load(path) as data:
        try:
            grid = GridMap(float(data["resolution"]), int(data["dims"]), center=data["anchor"])
            grid.offset = data["offset"].astype(np.int64)
            for name in ("elevation", "confidence", "hits"):
                if data[name].shape != grid.shape:
                    raise ValueError(f"layer {name} has shape {data[name].shape}, expected {grid.shape}")
                grid.layers[name] = data[name].copy()
        except KeyError as exc:
            raise ValueError(f"snapshot lacks {exc.args[0]!r}") from None
    return grid


def terrain_csv(grid: GridMap) -> str:
    """One ``x,y,g,c`` row per cell (cell centers), row-major, full precision."""
    xs, ys = grid.cell_centers()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x", "y", "g", "c"))
    for x, y, g, c in zip(xs.ravel().tolist(), ys.ravel().tolist(),
                          grid.elevation.ravel().tolist(), grid.confidence.ravel().tolist()):
        w.writerow((repr(x), repr(y), repr(g), repr(c)))
    return buf.getvalue()


def read_terrain_csv(text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Parse ``terrain_csv`` output back into flat ``x, y, g, c`` arrays."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["x", "y", "g", "c"]:
        raise ValueError("missing x,y,g,c header")
    data = np.array(rows[1:], dtype=np.float64).reshape(-1, 4)
    return data[:, 0], data[:, 1], data[:, 2], data[:, 3]


def terrain_pgm(grid: GridMap) -> tuple[bytes, str]:
    """Elevation as a binary 16-bit PGM plus a ``key = value`` sidecar.

    Image row 0 is the northmost map row so the picture reads like a map.
    Gray ``k`` dequantizes to ``min + k * (max - min) / 65535``. A constant
    map is written as mid-gray.
    """
    g = grid.elevation
    lo, hi = float(np.min(g)), float(np.max(g))
    if hi > lo:
        q = np.rint((g - lo) / (hi - lo) * PGM_MAX)
    else:
        q = np.full(g.shape, (PGM_MAX + 1) // 2)
    img = np.clip(q, 0, PGM_MAX).astype(">u2")[::-1]
    header = f"P5\n{grid.dims} {grid.dims}\n{PGM_MAX}\n".encode("ascii")
    cx, cy = grid.center
    sidecar = (
        f"min = {lo!r}\nmax = {hi!r}\nresolution = {grid.resolution!r}\n"
        f"center_x = {float(cx)!r}\ncenter_y = {float(cy)!r}\ndims = {grid.dims}\n"
    )
    return header + img.tobytes(), sidecar


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a binary P5 image with maxval above 255 (big-endian samples)."""
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        end = pos
        while end < len(data) and not data[end:end + 1].isspace():
            end += 1
        if end == pos:
            raise ValueError("truncated PGM header")
        fields.append(data[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval < 256:
        raise ValueError("expected a 16-bit PGM")
    # exactly one whitespace byte separates the header from the samples
    pixels = np.frombuffer(data[pos + 1:pos + 1 + 2 * w * h], dtype=">u2")
    if pixels.size != w * h:
        raise ValueError("truncated PGM")
    return pixels.reshape(h, w).astype(np.int64)
