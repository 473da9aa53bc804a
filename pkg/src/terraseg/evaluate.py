"""Binary ground-segmentation metrics and terrain error against ground truth."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, fields

import numpy as np

from .config import Config

TRUTH_NON_GROUND = 0
TRUTH_GROUND = 1
TRUTH_IGNORED = 2


def map_truth_label(semantic, cfg: Config | None = None):
    """Map semantic ids (scalar or array) to ``TRUTH_GROUND``,
    ``TRUTH_NON_GROUND`` or ``TRUTH_IGNORED``. Instance bits are dropped."""
    cfg = cfg or Config()
    ids = np.asarray(semantic, dtype=np.int64) & 0xFFFF
    out = np.where(np.isin(ids, sorted(cfg.ground_ids)), TRUTH_GROUND, TRUTH_NON_GROUND)
    out = np.where(np.isin(ids, sorted(cfg.ignore_ids)), TRUTH_IGNORED, out)
    return int(out) if out.ndim == 0 else out.astype(np.int8)


def predicted_ground(semantic, cfg: Config | None = None) -> np.ndarray:
    """Predicted-ground mask from written label codes.

    A prediction is ground when its id is the configured ground code or one of
    the ground ids; every other code, outliers included, is non-ground.
    """
    cfg = cfg or Config()
    ids = np.asarray(semantic, dtype=np.int64) & 0xFFFF
    return np.isin(ids, sorted(set(cfg.ground_ids) | {cfg.label_ground}))


@dataclass(frozen=True)
class ConfusionCounts:
    """Point tallies with ground as the positive class."""

    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ValueError(f"{f.name} must be >= 0")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)

    __add__ = merge


def accumulate_confusion(pred_ground, truth_labels, cfg: Config | None = None) -> ConfusionCounts:
    """Tally a frame.

    Args:
        pred_ground: boolean predicted-ground mask, one entry per point.
        truth_labels: semantic truth ids aligned with ``pred_ground``.
        cfg: supplies the ground and ignore id sets.
    """
    pred = np.asarray(pred_ground, dtype=bool)
    truth = np.asarray(truth_labels)
    if pred.shape != truth.shape:
        raise ValueError(f"prediction has {pred.size} points, truth has {truth.size}")
    t = map_truth_label(truth, cfg) if truth.size else np.zeros(0, dtype=np.int8)
    pos = t == TRUTH_GROUND
    neg = t == TRUTH_NON_GROUND
    return ConfusionCounts(
        tp=int(np.count_nonzero(pred & pos)),
        fp=int(np.count_nonzero(pred & neg)),
        tn=int(np.count_nonzero(~pred & neg)),
        fn=int(np.count_nonzero(~pred & pos)),
    )


@dataclass(frozen=True)
class Metrics:
    """Ratios in [0, 1]; ``None`` where the ratio is 0/0."""

    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None
    iou: float | None


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def compute_metrics(c: ConfusionCounts) -> Metrics:
    return Metrics(
        precision=_ratio(c.tp, c.tp + c.fp),
        recall=_ratio(c.tp, c.tp + c.fn),
        f1=_ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn),
        accuracy=_ratio(c.tp + c.tn, c.total),
        iou=_ratio(c.tp, c.tp + c.fp + c.fn),
    )


def terrain_rmse(estimate, truth, mask) -> float | None:
    """Root mean square of ``estimate - truth`` over ``mask``; ``None`` if the mask is empty."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return None
    err = np.asarray(estimate, dtype=np.float64)[mask] - np.asarray(truth, dtype=np.float64)[mask]
    return math.sqrt(float(np.mean(err * err)))


def density_mask(hits, resolution: float, min_density: float = 27.0) -> np.ndarray:
    """Cells whose accumulated point count reaches ``min_density`` points per m^2."""
    return np.asarray(hits) >= min_density * resolution * resolution


METRIC_COLUMNS = ("precision", "recall", "f1", "accuracy", "iou")


def metrics_table(rows: dict[str, Metrics]) -> str:
    """CSV with one row per sequence and an ``average`` row.

    The average is the unweighted mean over sequences of each defined metric.
    Undefined values are written as empty fields.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("seq",) + METRIC_COLUMNS)

    def fmt(v):
        return "" if v is None else repr(float(v))

    for seq, m in rows.items():
        w.writerow([seq] + [fmt(getattr(m, k)) for k in METRIC_COLUMNS])
    avg = []
    for k in METRIC_COLUMNS:
        vals = [getattr(m, k) for m in rows.values() if getattr(m, k) is not None]
        avg.append(fmt(sum(vals) / len(vals)) if vals else "")
    w.writerow(["average"] + avg)
    return buf.getvalue()
