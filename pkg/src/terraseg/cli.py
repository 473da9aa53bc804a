"""Command line entry point: ``terraseg run|eval|synth|export-terrain``.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import statistics
import sys
from pathlib import Path

import numpy as np

from . import export
from .config import Config, ConfigError, load_config
from .evaluate import Metrics, accumulate_confusion, compute_metrics, metrics_table, predicted_ground
from .kitti import FormatError, Sequence, format_calib, format_pose_line, read_labels, write_labels, write_velodyne_bin
from .pipeline import STAGES, Pipeline
from .segment import to_semantic

log = logging.getLogger("terraseg")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _read_config(path: str | None) -> Config:
    if path is None:
        return Config()
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file {p} not found")
    try:
        return load_config(p.read_text())
    except ConfigError as exc:
        raise DataError(f"{p}: {exc}") from None


# -- run ---------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = _read_config(args.config)
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        cfg = cfg.replace(worker_count=args.workers)
    if args.export_every is not None and args.export_every < 1:
        raise UsageError("--export-every must be >= 1")
    try:
        seq = Sequence.open(args.sequence)
    except (FileNotFoundError, FormatError) as exc:
        raise DataError(str(exc)) from None
    start = args.start or 0
    end = len(seq) if args.end is None else args.end
    if not 0 <= start < end <= len(seq):
        raise UsageError(f"frame range [{start}, {end}) is invalid for {len(seq)} scans")

    out = Path(args.out)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    if args.export_every:
        (out / "maps").mkdir(exist_ok=True)

    pipe = Pipeline(cfg)
    frames = []
    for k in range(start, end):
        try:
            cloud, kept = seq.load(k, with_mask=True)
        except FormatError as exc:
            raise DataError(f"{seq.scans[k]}: {exc}") from None
        result = pipe.process(cloud)
        codes = np.full(kept.size, cfg.label_nonground, dtype=np.uint32)
        codes[kept] = to_semantic(result.labels, cfg)
        (out / "labels" / f"{seq.scans[k].stem}.label").write_bytes(write_labels(codes))
        frames.append({"frame": k, "points": int(kept.size), "outliers": int(result.outliers.sum()),
                       "out_of_map": result.out_of_map, **{s: result.timings_ms[s] for s in (*STAGES, "total")}})
        if args.export_every and (k - start + 1) % args.export_every == 0:
            export.save_snapshot(pipe.grid, out / "maps" / f"{seq.scans[k].stem}.npz")
        log.info("frame %d: %d points, %.1f ms", k, kept.size, result.timings_ms["total"])

    export.save_snapshot(pipe.grid, out / "final_map.npz")
    if args.format == "csv":
        (out / "final_terrain.csv").write_text(export.terrain_csv(pipe.grid))
    else:
        image, sidecar = export.terrain_pgm(pipe.grid)
        (out / "final_terrain.pgm").write_bytes(image)
        (out / "final_terrain.txt").write_text(sidecar)

    summary = {s: statistics.median(f[s] for f in frames) for s in (*STAGES, "total")}
    report = {"backend": _backend(), "workers": cfg.worker_count, "frames": frames,
              "median_ms": summary, "mean_hz": 1e3 / statistics.fmean(f["total"] for f in frames)}
    timing_path = Path(args.timing_out) if args.timing_out else out / "timing.json"
    timing_path.write_text(json.dumps(report, indent=1))
    print(f"{len(frames)} frames, median {summary['total']:.2f} ms/frame -> {out}")
    return EXIT_OK


def _backend() -> str:
    from .kernels import BACKEND

    return BACKEND


# -- eval --------------------------------------------------------------------

def _label_files(root: Path) -> dict[str, Path]:
    d = root / "labels" if (root / "labels").is_dir() else root
    return {p.stem: p for p in sorted(d.glob("*.label"))}


def _sequence_pairs(pred: Path, truth: Path) -> dict[str, tuple[Path, Path]]:
    if _label_files(pred):
        return {truth.name or "seq": (pred, truth)}
    pairs = {}
    for sub in sorted(p for p in pred.iterdir() if p.is_dir()):
        if not (truth / sub.name).is_dir():
            raise DataError(f"no truth for sequence {sub.name} under {truth}")
        pairs[sub.name] = (sub, truth / sub.name)
    if not pairs:
        raise DataError(f"no .label files under {pred}")
    return pairs


def cmd_eval(args) -> int:
    cfg = _read_config(args.config)
    pred_root, truth_root = Path(args.pred), Path(args.truth)
    for p in (pred_root, truth_root):
        if not p.is_dir():
            raise DataError(f"{p} is not a directory")
    rows: dict[str, Metrics] = {}
    for seq, (pdir, tdir) in _sequence_pairs(pred_root, truth_root).items():
        preds, truths = _label_files(pdir), _label_files(tdir)
        if not truths:
            raise DataError(f"no truth labels for sequence {seq}")
        for name in sorted(set(preds) ^ set(truths)):
            side = "prediction" if name in truths else "truth"
            raise DataError(f"sequence {seq}: frame {name} has no {side}")
        counts = None
        for name in sorted(preds):
            try:
                p = read_labels(preds[name].read_bytes())
                t = read_labels(truths[name].read_bytes())
                c = accumulate_confusion(predicted_ground(p, cfg), t, cfg)
            except (FormatError, ValueError) as exc:
                raise DataError(f"sequence {seq}: frame {name}: {exc}") from None
            counts = c if counts is None else counts.merge(c)
        rows[seq] = compute_metrics(counts)
    table = metrics_table(rows)
    if args.out:
        Path(args.out).write_text(table)
    sys.stdout.write(table)
    return EXIT_OK


# -- synth -------------------------------------------------------------------

def cmd_synth(args) -> int:
    from . import synth

    if args.frames < 1:
        raise UsageError("--frames must be >= 1")
    if args.scene:
        p = Path(args.scene)
        if not p.is_file():
            raise DataError(f"scene file {p} not found")
        try:
            spec = synth.load_scene(p.read_text())
        except (ConfigError, ValueError) as exc:
            raise DataError(f"{p}: {exc}") from None
    else:
        spec = synth.flat_scene() if args.preset == "flat" else synth.sloped_scene()
    overrides = {k: v for k, v in (("seed", args.seed), ("outlier_rate", args.outlier_rate)) if v is not None}
    if overrides:
        try:
            spec = dataclasses.replace(spec, **overrides)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    out = Path(args.out)
    (out / "velodyne").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(exist_ok=True)
    poses = synth.drive(spec, args.frames, speed=args.speed, heading_deg=args.heading)
    lines = []
    for k, pose in enumerate(poses):
        scan = synth.generate_scan(spec, pose, k)
        (out / "velodyne" / f"{k:06d}.bin").write_bytes(write_velodyne_bin(scan.cloud.points))
        (out / "labels" / f"{k:06d}.label").write_bytes(write_labels(scan.labels))
        lines.append(format_pose_line(pose))
    (out / "poses.txt").write_text("\n".join(lines) + "\n")
    (out / "calib.txt").write_text(format_calib())
    print(f"{args.frames} frames -> {out}")
    return EXIT_OK


# -- export-terrain ----------------------------------------------------------

def cmd_export(args) -> int:
    snap = Path(args.snapshot)
    if not snap.is_file():
        raise DataError(f"snapshot {snap} not found")
    try:
        grid = export.load_snapshot(snap)
    except (ValueError, OSError) as exc:
        raise DataError(f"{snap}: {exc}") from None
    out = Path(args.out)
    if args.format == "csv":
        out.write_text(export.terrain_csv(grid))
    else:
        image, sidecar = export.terrain_pgm(grid)
        out.write_bytes(image)
        out.with_suffix(".txt").write_text(sidecar)
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="terraseg", description="Elevation-map LiDAR ground segmentation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log every frame")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="segment a sequence")
    run.add_argument("sequence", help="directory with velodyne/, poses.txt and calib.txt")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--config", help="key = value parameter file")
    run.add_argument("--workers", type=int, help="intra-frame worker threads")
    run.add_argument("--start", type=int, help="first frame (inclusive)")
    run.add_argument("--end", type=int, help="last frame (exclusive)")
    run.add_argument("--export-every", type=int, metavar="N", help="snapshot the map every N frames")
    run.add_argument("--timing-out", help="timing report path (default OUT/timing.json)")
    run.add_argument("--format", choices=export.FORMATS, default="pgm", help="final terrain export format")
    run.set_defaults(func=cmd_run)

    ev = sub.add_parser("eval", help="score predicted labels against truth")
    ev.add_argument("pred", help="predicted labels (a sequence or a directory of sequences)")
    ev.add_argument("truth", help="truth labels laid out like PRED")
    ev.add_argument("--config", help="parameter file with ground_ids / ignore_ids")
    ev.add_argument("--out", help="write the metrics CSV here")
    ev.set_defaults(func=cmd_eval)

    sy = sub.add_parser("synth", help="write a synthetic labeled sequence")
    sy.add_argument("out", help="output sequence directory")
    src = sy.add_mutually_exclusive_group()
    src.add_argument("--scene", help="scene description file")
    src.add_argument("--preset", choices=("flat", "sloped"), default="flat")
    sy.add_argument("--frames", type=int, default=10)
    sy.add_argument("--speed", type=float, default=1.0, help="meters per frame")
    sy.add_argument("--heading", type=float, default=0.0, help="driving direction in degrees")
    sy.add_argument("--seed", type=int)
    sy.add_argument("--outlier-rate", type=float)
    sy.set_defaults(func=cmd_synth)

    ex = sub.add_parser("export-terrain", help="export a map snapshot")
    ex.add_argument("snapshot", help=".npz map snapshot")
    ex.add_argument("--format", required=True, help="csv or pgm")
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "export-terrain" and args.format not in export.FORMATS:
            raise UsageError(f"unknown format {args.format!r}; choose from {', '.join(export.FORMATS)}")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
