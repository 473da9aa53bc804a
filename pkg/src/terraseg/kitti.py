"""Readers and writers for SemanticKITTI-style scan, label, pose and calibration files."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class FormatError(ValueError):
    """Raised when a file does not follow its documented layout."""


@dataclass
class PointCloud:
    """Ordered LiDAR returns.

    ``points`` is an ``(n, 4)`` float array of ``x, y, z, intensity``. Row
    ``k`` of every per-point output corresponds to row ``k`` here.
    """

    points: np.ndarray
    sensor_origin: np.ndarray = field(default_factory=lambda: np.zeros(3))
    frame_id: int = 0
    dropped: int = 0

    def __post_init__(self) -> None:
        self.points = np.asarray(self.points, dtype=np.float64).reshape(-1, 4)
        self.sensor_origin = np.asarray(self.sensor_origin, dtype=np.float64).reshape(3)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def xyz(self) -> np.ndarray:
        return self.points[:, :3]

    def transformed(self, pose: "Pose") -> "PointCloud":
        """The cloud in the frame ``pose`` maps into, with the sensor origin moved along."""
        pts = self.points.copy()
        pts[:, :3] = self.xyz @ pose.rotation.T + pose.translation
        origin = pose.rotation @ self.sensor_origin + pose.translation
        return PointCloud(pts, origin, self.frame_id, self.dropped)


@dataclass
class Pose:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self) -> None:
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if not np.allclose(self.rotation @ self.rotation.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(self.rotation) - 1.0) > 1e-6:
            raise ValueError("rotation determinant is not +1")

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Pose":
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m


# -- scans ------------------------------------------------------------------

def read_velodyne_bin(data: bytes, frame_id: int = 0) -> PointCloud:
    """Decode little-endian float32 ``x y z intensity`` records.

    Records with a non-finite coordinate are dropped; the number dropped is
    kept on ``PointCloud.dropped``.
    """
    if len(data) % 16:
        raise FormatError(f"scan length {len(data)} is not a multiple of 16 bytes")
    raw = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    finite = np.isfinite(raw[:, :3]).all(axis=1)
    dropped = int(raw.shape[0] - finite.sum())
    if dropped:
        log.warning("frame %d: dropped %d non-finite points", frame_id, dropped)
        raw = raw[finite]
    return PointCloud(raw.astype(np.float64), frame_id=frame_id, dropped=dropped)


def velodyne_finite_mask(data: bytes) -> np.ndarray:
    """Which records of a scan survive ``read_velodyne_bin``."""
    if len(data) % 16:
        raise FormatError(f"scan length {len(data)} is not a multiple of 16 bytes")
    raw = np.frombuffer(data, dtype="<f4").reshape(-1, 4)
    return np.isfinite(raw[:, :3]).all(axis=1)


def write_velodyne_bin(points: np.ndarray) -> bytes:
    return np.ascontiguousarray(np.asarray(points).reshape(-1, 4), dtype="<f4").tobytes()


# -- labels -----------------------------------------------------------------

def read_labels(data: bytes) -> np.ndarray:
    """Semantic ids (low 16 bits) of little-endian uint32 label words."""
    if len(data) % 4:
        raise FormatError(f"label length {len(data)} is not a multiple of 4 bytes")
    words = np.frombuffer(data, dtype="<u4")
    return (words & 0xFFFF).astype(np.uint32)


def write_labels(semantic: np.ndarray, instance: np.ndarray | int = 0) -> bytes:
    sem = np.asarray(semantic, dtype=np.uint32) & 0xFFFF
    inst = (np.asarray(instance, dtype=np.uint32) & 0xFFFF) << 16
    return np.ascontiguousarray(sem | inst, dtype="<u4").tobytes()


# -- poses and calibration --------------------------------------------------

def _parse_row12(text: str, what: str, lineno: int) -> np.ndarray:
    parts = text.split()
    if len(parts) != 12:
        raise FormatError(f"{what} line {lineno}: expected 12 values, got {len(parts)}")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise FormatError(f"{what} line {lineno}: {exc}") from None
    m = np.eye(4)
    m[:3, :] = np.reshape(vals, (3, 4))
    return m


def read_calib(text: str) -> np.ndarray:
    """The 4x4 ``Tr`` (sensor to camera) transform of a ``calib.txt``."""
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("Tr:"):
            return _parse_row12(line[3:], "calib", lineno)
    raise FormatError("calib: no 'Tr:' line")


def read_poses(poses_text: str, calib_text: str | None = None) -> list[Pose]:
    """Per-frame poses mapping sensor coordinates into the world frame.

    Camera-frame poses ``P_k`` are conjugated with the calibration: ``Tr^-1 P_k Tr``.
    Without calibration ``Tr`` is the identity.
    """
    tr = read_calib(calib_text) if calib_text is not None else np.eye(4)
    tr_inv = np.linalg.inv(tr)
    poses = []
    for lineno, line in enumerate(poses_text.splitlines(), start=1):
        if not line.strip():
            continue
        p = _parse_row12(line, "poses", lineno)
        m = tr_inv @ p @ tr
        try:
            poses.append(Pose.from_matrix(m))
        except ValueError as exc:
            raise FormatError(f"poses line {lineno}: {exc}") from None
    return poses


def format_pose_line(pose: Pose) -> str:
    return " ".join(repr(float(v)) for v in pose.matrix()[:3, :].ravel())


def format_calib(tr: np.ndarray | None = None) -> str:
    tr = np.eye(4) if tr is None else tr
    return "Tr: " + " ".join(repr(float(v)) for v in tr[:3, :].ravel()) + "\n"


# -- sequences --------------------------------------------------------------

@dataclass
class Sequence:
    """File layout of one sequence: ``velodyne/*.bin``, ``poses.txt``,
    ``calib.txt`` and optionally ``labels/*.label``."""

    root: Path
    scans: list[Path]
    poses: list[Pose]

    @classmethod
    def open(cls, root: str | Path) -> "Sequence":
        root = Path(root)
        if not root.is_dir():
            raise FileNotFoundError(f"sequence directory {root} does not exist")
        scans = sorted((root / "velodyne").glob("*.bin"))
        if not scans:
            raise FileNotFoundError(f"no scans under {root / 'velodyne'}")
        poses_path = root / "poses.txt"
        if not poses_path.is_file():
            raise FileNotFoundError(f"missing {poses_path}")
        calib_path = root / "calib.txt"
        calib = calib_path.read_text() if calib_path.is_file() else None
        poses = read_poses(poses_path.read_text(), calib)
        if len(poses) < len(scans):
            raise FormatError(f"{poses_path}: {len(poses)} poses for {len(scans)} scans")
        return cls(root, scans, poses)

    def __len__(self) -> int:
        return len(self.scans)

    def load(self, k: int, with_mask: bool = False):
        """World-frame cloud of scan ``k``; with ``with_mask`` also the mask
        of records kept from the file."""
        data = self.scans[k].read_bytes()
        cloud = read_velodyne_bin(data, frame_id=k).transformed(self.poses[k])
        if with_mask:
            return cloud, velodyne_finite_mask(data)
        return cloud

    def label_path(self, k: int) -> Path:
        return self.root / "labels" / (self.scans[k].stem + ".label")
