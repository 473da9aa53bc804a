"""Elevation-map LiDAR ground segmentation and terrain estimation."""
from .config import Config, ConfigError, load_config
from .grid import GridMap, spiral_indices
from .kernels import BACKEND
from .kitti import PointCloud, Pose
from .pipeline import FrameResult, Pipeline

__all__ = [
    "BACKEND",
    "Config",
    "ConfigError",
    "FrameResult",
    "GridMap",
    "Pipeline",
    "PointCloud",
    "Pose",
    "load_config",
    "spiral_indices",
]

__version__ = "0.1.0"
