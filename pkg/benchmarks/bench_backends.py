"""Time every kernel on the compiled and the pure Python backend.

Run after installing the package::

    python3 benchmarks/bench_backends.py [--points 130000] [--repeat 5]

Inputs come from a synthetic scan pushed through a warmed-up pipeline, so the
kernels see realistic maps, point counts and trust patterns. Each kernel is
checked for identical output across backends before it is timed.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from terraseg import Config, Pipeline
from terraseg.grid import CELL_GROUND, spiral_order
from terraseg.kernels import backends
from terraseg.outliers import block_maxima, trusted_cells
from terraseg.synth import drive, flat_scene, generate_scan


def _inputs(points: int, cfg: Config):
    # the default 900-step revolution returns about 50k points on this scene
    step = 360.0 / int(np.ceil(900 * points / 50_000))
    spec = flat_scene(azimuth_step_deg=step, outlier_rate=0.02)
    pipe = Pipeline(cfg)
    poses = drive(spec, 6)
    for k, pose in enumerate(poses[:-1]):
        pipe.process(generate_scan(spec, pose, k).cloud.transformed(pose))
    cloud = generate_scan(spec, poses[-1], len(poses) - 1).cloud.transformed(poses[-1])
    grid = pipe.grid.recenter(cloud.sensor_origin[:2])
    proj = grid.project(cloud.xyz[:, 0], cloud.xyz[:, 1])
    su, sv = grid.to_grid_units(*cloud.sensor_origin[:2])
    trusted = trusted_cells(grid, cfg)
    g = np.ascontiguousarray(grid.elevation)
    flat_count = np.bincount(proj.flat[proj.inside], minlength=grid.dims ** 2)
    active = np.flatnonzero(flat_count).astype(np.int64)
    start = grid.world_to_cell(cloud.sensor_origin[:2])
    return {
        "n_points": len(cloud),
        "z": np.ascontiguousarray(cloud.xyz[:, 2]),
        "cell": proj.flat,
        "n_cells": grid.dims ** 2,
        "u": proj.u, "v": proj.v, "su": float(su), "sv": float(sv),
        "sz": float(cloud.sensor_origin[2]),
        "g": g, "c": np.ascontiguousarray(grid.confidence),
        "trusted": trusted, "bmax": block_maxima(g, trusted),
        "active": active, "radius": np.where(np.arange(active.size) % 2, 1, 2).astype(np.int64),
        "skip": np.ascontiguousarray(pipe.grid.layers["ground_flag"] == CELL_GROUND, dtype=np.int8),
        "order": spiral_order(grid.dims, (start.i, start.j)),
    }


def _cases(mod, d, cfg):
    def box():
        return mod.box_sum(d["c"], 2)

    def welford():
        n = d["n_cells"]
        out = (np.zeros(n, np.int64), np.zeros(n), np.zeros(n), np.full(n, np.inf), np.full(n, -np.inf))
        mod.welford_cells(d["z"], d["cell"], 0, n, *out)
        return out

    def occlusion():
        out = np.zeros(d["n_points"], np.uint8)
        mod.occlusion_mask(d["su"], d["sv"], d["sz"], d["u"], d["v"], d["z"], d["g"], d["trusted"],
                           d["bmax"], cfg.o_t, out, 0, d["n_points"])
        return out

    def windows():
        a = np.empty(d["active"].size)
        b = np.empty(d["active"].size)
        mod.window_sums(d["g"], d["c"], d["active"], d["radius"], a, b)
        return a, b

    def spiral():
        g, c = d["g"].copy(), d["c"].copy()
        mod.spiral_interpolate(g, c, d["skip"], d["order"], float(cfg.theta))
        return g, c

    return {"box_sum": box, "welford_cells": welford, "occlusion_mask": occlusion,
            "window_sums": windows, "spiral_interpolate": spiral}


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b, equal_nan=True) if a.dtype.kind == "f" else np.array_equal(a, b)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=130_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    cfg = Config()
    d = _inputs(args.points, cfg)
    mods = backends()
    print(f"{d['n_points']} points, {d['n_cells']} cells, backends: {', '.join(mods)}")
    cases = {name: _cases(mod, d, cfg) for name, mod in mods.items()}
    print(f"{'kernel':<20}" + "".join(f"{n + ' ms':>14}" for n in mods) + f"{'speedup':>10}  identical")
    for kernel in cases["python"]:
        times, outs = {}, {}
        for name in mods:
            fn = cases[name][kernel]
            outs[name] = fn()
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                fn()
                best = min(best, time.perf_counter() - t0)
            times[name] = best * 1e3
        same = all(_same(outs["python"], o) for o in outs.values())
        speedup = times["python"] / times["compiled"] if "compiled" in times else float("nan")
        print(f"{kernel:<20}" + "".join(f"{times[n]:>14.2f}" for n in mods) + f"{speedup:>10.1f}  {same}")


if __name__ == "__main__":
    main()
