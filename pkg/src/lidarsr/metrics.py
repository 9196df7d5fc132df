"""Point cloud and range image evaluation metrics.

Chamfer distance is reported in its squared form,

    CD = (1/N) sum_{x in pred} min_{y in gt} |x - y|^2
       + (1/M) sum_{y in gt} min_{x in pred} |y - x|^2

so the value carries units of square meters.  Voxel IoU compares
occupied-voxel sets at a fixed edge length with floor binning anchored
at the origin.  Range MAE is normalized by r_max, so it is a
dimensionless fraction of the usable range.  The banded report splits
clouds by horizontal radius into 10 m shells out to 50 m and evaluates
each shell separately; shells without points on both sides are reported
absent (JSON null), never as zero.
"""

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .geometry import RangeImage

DEFAULT_VOXEL_M = 0.1
DEFAULT_BAND_EDGES_M = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)


def _check_cloud(name, cloud, allow_empty=False) -> np.ndarray:
    cloud = np.asarray(cloud, dtype=np.float64)
    if cloud.size == 0:
        cloud = cloud.reshape(0, 3)
    if cloud.ndim != 2 or cloud.shape[1] != 3:
        raise InputError(f"{name} must have shape (N, 3), got {cloud.shape}")
    if not allow_empty and len(cloud) == 0:
        raise InputError(f"{name} is empty")
    if not np.isfinite(cloud).all():
        raise InputError(f"{name} contains non-finite coordinates")
    return cloud


def chamfer(pred, gt) -> float:
    """Symmetric mean squared nearest-neighbor distance, square meters.

    Nearest neighbors come from a k-d tree, but the squared distances are
    recomputed from the matched pairs, so the result is bitwise the same
    as an exhaustive scan.
    """
    pred = _check_cloud("pred", pred)
    gt = _check_cloud("gt", gt)
    pred_tree = cKDTree(pred)
    gt_tree = cKDTree(gt)
    _, idx_pg = gt_tree.query(pred, k=1)
    _, idx_gp = pred_tree.query(gt, k=1)
    d_pg = np.sum((pred - gt[idx_pg]) ** 2, axis=1)
    d_gp = np.sum((gt - pred[idx_gp]) ** 2, axis=1)
    return float(d_pg.mean() + d_gp.mean())


def chamfer_bruteforce(pred, gt) -> float:
    """O(N*M) reference implementation; the oracle for chamfer()."""
    pred = _check_cloud("pred", pred)
    gt = _check_cloud("gt", gt)
    d2 = np.sum((pred[:, None, :] - gt[None, :, :]) ** 2, axis=2)
    return float(d2.min(axis=1).mean() + d2.min(axis=0).mean())


def _voxel_set(cloud: np.ndarray, voxel: float):
    idx = np.floor(cloud / voxel).astype(np.int64)
    return set(map(tuple, idx))


def voxel_iou(pred, gt, voxel: float = DEFAULT_VOXEL_M) -> float:
    """Occupied-voxel intersection over union at the given edge length.

    Voxel index = floor(coordinate / voxel) per axis.  Undefined (raises)
    when both clouds are empty.
    """
    if not (np.isfinite(voxel) and voxel > 0):
        raise InputError(f"voxel size must be positive, got {voxel}")
    pred = _check_cloud("pred", pred, allow_empty=True)
    gt = _check_cloud("gt", gt, allow_empty=True)
    if len(pred) == 0 and len(gt) == 0:
        raise InputError("voxel IoU is undefined for two empty clouds")
    vp = _voxel_set(pred, voxel)
    vg = _voxel_set(gt, voxel)
    return len(vp & vg) / len(vp | vg)


def range_mae(pred: RangeImage, gt: RangeImage) -> float:
    """Mean absolute range error over gt-valid pixels, normalized by r_max.

    Prediction holes at gt-valid pixels count as 0 range, i.e. they
    contribute their full |0 - gt| error.
    """
    if pred.shape != gt.shape:
        raise InputError(
            f"image dims differ: pred {pred.shape} vs gt {gt.shape}"
        )
    if pred.calibration.r_max != gt.calibration.r_max:
        raise InputError(
            f"r_max differs: pred {pred.calibration.r_max} vs gt "
            f"{gt.calibration.r_max}"
        )
    valid = np.isfinite(gt.values)
    if not valid.any():
        raise InputError("ground truth image has no valid pixels")
    pred_values = np.nan_to_num(pred.values, nan=0.0)
    err = np.abs(pred_values[valid] - gt.values[valid])
    return float(err.mean() / gt.calibration.r_max)


@dataclass(frozen=True)
class BandMetrics:
    """Metrics for one horizontal-radius shell; None marks an absent band."""

    lo_m: float
    hi_m: float
    cd: float | None
    iou: float | None

    def to_dict(self) -> dict:
        return {"range_m": [self.lo_m, self.hi_m], "cd": self.cd, "iou": self.iou}


@dataclass(frozen=True)
class MetricsReport:
    cd: float
    iou: float
    mae: float | None
    bands: tuple

    def __post_init__(self):
        if self.cd < 0:
            raise InputError(f"cd must be >= 0, got {self.cd}")
        if not 0.0 <= self.iou <= 1.0:
            raise InputError(f"iou must be in [0, 1], got {self.iou}")
        if self.mae is not None and self.mae < 0:
            raise InputError(f"mae must be >= 0, got {self.mae}")
        edges = [b.lo_m for b in self.bands] + [b.hi_m for b in self.bands[-1:]]
        if any(a >= b for a, b in zip(edges, edges[1:])):
            raise InputError("band intervals must be ordered and disjoint")

    def to_dict(self) -> dict:
        return {
            "cd": self.cd,
            "iou": self.iou,
            "mae": self.mae,
            "bands": [b.to_dict() for b in self.bands],
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def banded_report(
    pred,
    gt,
    mae: float | None = None,
    voxel: float = DEFAULT_VOXEL_M,
    band_edges=DEFAULT_BAND_EDGES_M,
) -> MetricsReport:
    """Overall chamfer/IoU plus per-shell breakdowns by horizontal radius.

    A shell is evaluated only when both clouds have points in it;
    otherwise its entry is absent (nulls in JSON).  mae is carried
    through from the range-image comparison when the caller has one.
    """
    pred = _check_cloud("pred", pred)
    gt = _check_cloud("gt", gt)
    r_pred = np.hypot(pred[:, 0], pred[:, 1])
    r_gt = np.hypot(gt[:, 0], gt[:, 1])
    bands = []
    for lo, hi in zip(band_edges, band_edges[1:]):
        p_sel = pred[(r_pred >= lo) & (r_pred < hi)]
        g_sel = gt[(r_gt >= lo) & (r_gt < hi)]
        if len(p_sel) and len(g_sel):
            bands.append(
                BandMetrics(
                    lo_m=lo,
                    hi_m=hi,
                    cd=chamfer(p_sel, g_sel),
                    iou=voxel_iou(p_sel, g_sel, voxel),
                )
            )
        else:
            bands.append(BandMetrics(lo_m=lo, hi_m=hi, cd=None, iou=None))
    return MetricsReport(
        cd=chamfer(pred, gt),
        iou=voxel_iou(pred, gt, voxel),
        mae=mae,
        bands=tuple(bands),
    )
