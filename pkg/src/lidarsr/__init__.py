"""LiDAR range-image super-resolution, inference only.

A scan becomes a range image by beam-voting spherical projection, gets
its holes filled from vertical or horizontal neighbors, runs through a
state-space encoder-decoder that multiplies the beam count, and returns
to 3D as a dense point cloud, with chamfer / voxel-IoU / range-MAE
metrics against a reference scan.
"""

from .errors import (
    ConfigError,
    InputError,
    LidarSrError,
    NumericalError,
    ParseError,
    SelfcheckError,
    WeightCorruptionError,
    WeightMismatchError,
    WeightsError,
)
from .geometry import (
    BeamCalibration,
    RangeImage,
    back_project,
    default_calibration,
    hole_compensate,
    load_calibration,
    load_rimg,
    load_scan,
    project,
    save_calibration,
    save_ply,
    save_range_png,
    save_rimg,
)
from .metrics import MetricsReport, banded_report, chamfer, range_mae, voxel_iou
from .model import NetworkConfig, build, forward, load_weights, param_count, save_weights

__version__ = "0.1.0"

__all__ = [
    "BeamCalibration",
    "ConfigError",
    "InputError",
    "LidarSrError",
    "MetricsReport",
    "NetworkConfig",
    "NumericalError",
    "ParseError",
    "RangeImage",
    "SelfcheckError",
    "WeightCorruptionError",
    "WeightMismatchError",
    "WeightsError",
    "back_project",
    "banded_report",
    "build",
    "chamfer",
    "default_calibration",
    "forward",
    "hole_compensate",
    "load_calibration",
    "load_rimg",
    "load_scan",
    "load_weights",
    "param_count",
    "project",
    "range_mae",
    "save_calibration",
    "save_ply",
    "save_range_png",
    "save_rimg",
    "save_weights",
    "voxel_iou",
    "__version__",
]
