"""Point cloud <-> range image conversion.

A range image is an H x W grid: row = laser beam, column = azimuth bin,
value = range in meters.  Hole pixels (no return) are NaN in memory and 0
in the binary export, 0 being impossible for a real range.

Projection assigns each point to the beam whose nominal inclination
minimizes the angular residual (voting over all beams) instead of
truncating the computed angle:

    v = argmin_b |phi_b - atan2(delta_b - z, sqrt(x^2 + y^2))|
    u = floor((1 - (atan2(y, x) + pi) / (2 pi)) * W)   clamped to [0, W-1]
    r = min(sqrt(x^2 + y^2 + (z - delta_v)^2), r_max)

where phi_b / delta_b are the per-beam inclination angles and vertical
offsets.  When several points fall into one pixel the smallest range wins.

Point clouds are plain float64 numpy arrays of shape (N, 3), columns
x, y, z in meters, sensor frame.
"""

import io
import json
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, ParseError

RIMG_MAGIC = b"RIMG"
KITTI_RECORD_BYTES = 16  # x, y, z, intensity as little-endian float32


@dataclass(frozen=True)
class BeamCalibration:
    """Per-beam vertical angles and offsets plus image geometry.

    phi:    (H,) inclination angle per beam, radians, strictly descending
            from the top beam to the bottom beam.
    delta:  (H,) vertical offset per beam, meters.
    r_max:  maximum usable range, meters.
    width:  number of azimuth columns.
    """

    phi: np.ndarray
    delta: np.ndarray
    r_max: float
    width: int

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        delta = np.asarray(self.delta, dtype=np.float64)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "delta", delta)
        if phi.ndim != 1 or delta.ndim != 1 or phi.shape != delta.shape:
            raise ConfigError("phi and delta must be 1-D arrays of equal length")
        if len(phi) < 2:
            raise ConfigError("calibration needs at least 2 beams")
        if not (np.isfinite(phi).all() and np.isfinite(delta).all()):
            raise ConfigError("calibration angles/offsets must be finite")
        if not (np.diff(phi) < 0).all():
            raise ConfigError("phi must be strictly descending (top beam first)")
        if self.width < 4:
            raise ConfigError(f"width must be >= 4, got {self.width}")
        if not (np.isfinite(self.r_max) and self.r_max > 0):
            raise ConfigError(f"r_max must be positive, got {self.r_max}")

    @property
    def height(self) -> int:
        return len(self.phi)


@dataclass(frozen=True)
class RangeImage:
    """H x W grid of ranges in meters; NaN marks hole pixels."""

    values: np.ndarray
    calibration: BeamCalibration

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        calib = self.calibration
        if values.shape != (calib.height, calib.width):
            raise InputError(
                f"image shape {values.shape} does not match calibration "
                f"({calib.height}, {calib.width})"
            )
        valid = values[np.isfinite(values)]
        if valid.size and not ((valid > 0) & (valid <= calib.r_max)).all():
            raise InputError("valid ranges must lie in (0, r_max]")

    @property
    def shape(self):
        return self.values.shape

    def hole_mask(self) -> np.ndarray:
        return ~np.isfinite(self.values)

    def valid_count(self) -> int:
        return int(np.isfinite(self.values).sum())


def default_calibration(r_max: float = 80.0, width: int = 1024) -> BeamCalibration:
    """Built-in 64-beam uniform fan from +2.0 deg to -24.8 deg, zero offsets.

    HDL-64E-like; real sensors publish their own tables, loaded with
    load_calibration.
    """
    phi = np.deg2rad(np.linspace(2.0, -24.8, 64))
    return BeamCalibration(phi=phi, delta=np.zeros(64), r_max=r_max, width=width)


def load_calibration(path) -> BeamCalibration:
    """Load a calibration JSON with fields phi_deg, delta_m, r_max_m, width."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"calibration file not found: {path}") from None
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read calibration {path}: {exc}") from None
    try:
        return BeamCalibration(
            phi=np.deg2rad(np.asarray(raw["phi_deg"], dtype=np.float64)),
            delta=np.asarray(raw["delta_m"], dtype=np.float64),
            r_max=float(raw["r_max_m"]),
            width=int(raw["width"]),
        )
    except KeyError as exc:
        raise ConfigError(f"calibration {path} is missing field {exc}") from None


def save_calibration(calib: BeamCalibration, path) -> None:
    from ._util import atomic_write_text

    doc = {
        "phi_deg": np.rad2deg(calib.phi).tolist(),
        "delta_m": calib.delta.tolist(),
        "r_max_m": calib.r_max,
        "width": calib.width,
    }
    atomic_write_text(path, json.dumps(doc, indent=2) + "\n")


def _check_points(points) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return points.reshape(0, 3)
    if points.ndim != 2 or points.shape[1] != 3:
        raise InputError(f"point cloud must have shape (N, 3), got {points.shape}")
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise InputError(f"point {idx} has non-finite coordinates: {points[idx]}")
    return points


def project(cloud, calib: BeamCalibration) -> RangeImage:
    """Spherical projection of a point cloud onto a range image.

    Every point votes for the beam row with the smallest inclination
    residual, evaluated against all beams with that beam's vertical
    offset.  Pixel collisions keep the smallest range; unhit pixels stay
    holes.
    """
    points = _check_points(cloud)
    h, w = calib.height, calib.width
    grid = np.full((h, w), np.inf)
    if len(points):
        x, y, z = points[:, 0], points[:, 1], points[:, 2]
        rho = np.hypot(x, y)
        # (N, H) residual matrix: each point against every beam.
        incl = np.arctan2(calib.delta[None, :] - z[:, None], rho[:, None])
        rows = np.argmin(np.abs(calib.phi[None, :] - incl), axis=1)
        az = np.arctan2(y, x)
        cols = np.floor((1.0 - (az + np.pi) / (2.0 * np.pi)) * w).astype(np.int64)
        cols = np.clip(cols, 0, w - 1)
        dz = z - calib.delta[rows]
        ranges = np.minimum(np.sqrt(x * x + y * y + dz * dz), calib.r_max)
        np.minimum.at(grid, (rows, cols), ranges)
    values = np.where(np.isinf(grid), np.nan, grid)
    return RangeImage(values=values, calibration=calib)


_WINDOW_OFFSETS = {
    "3x1": ((-1, 0), (1, 0)),  # vertical: rows above and below
    "1x3": ((0, -1), (0, 1)),  # horizontal: columns left and right
}


def hole_compensate(img: RangeImage, window: str = "3x1") -> RangeImage:
    """Fill hole pixels with the average of their valid neighbors.

    The window is 3x1 (vertical) or 1x3 (horizontal), centered on the
    hole.  All reads come from the input grid, so fills never cascade
    within a pass and the result is order independent.  Holes whose
    window has no valid pixel remain holes; valid pixels are copied
    unchanged.
    """
    if window not in _WINDOW_OFFSETS:
        raise ConfigError(f"unsupported window {window!r}; use '3x1' or '1x3'")
    values = img.values
    valid = np.isfinite(values)
    filled = np.where(valid, values, 0.0)
    nb_sum = np.zeros_like(values)
    nb_cnt = np.zeros(values.shape, dtype=np.int64)
    for dr, dc in _WINDOW_OFFSETS[window]:
        shifted_val = _shift2d(filled, dr, dc)
        shifted_ok = _shift2d(valid.astype(np.float64), dr, dc) > 0.5
        nb_sum += np.where(shifted_ok, shifted_val, 0.0)
        nb_cnt += shifted_ok
    out = values.copy()
    fill = (~valid) & (nb_cnt > 0)
    out[fill] = nb_sum[fill] / nb_cnt[fill]
    return RangeImage(values=out, calibration=img.calibration)


def _shift2d(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Shift with zero fill; out[i, j] = arr[i + dr, j + dc] where defined."""
    h, w = arr.shape
    out = np.zeros_like(arr)
    src_r = slice(max(dr, 0), h + min(dr, 0))
    dst_r = slice(max(-dr, 0), h + min(-dr, 0))
    src_c = slice(max(dc, 0), w + min(dc, 0))
    dst_c = slice(max(-dc, 0), w + min(-dc, 0))
    out[dst_r, dst_c] = arr[src_r, src_c]
    return out


def back_project(img: RangeImage) -> np.ndarray:
    """Invert the spherical projection for every valid pixel.

    Columns invert at the pixel center (u + 0.5), so a round trip incurs
    at most half a column of yaw error:

        yaw = (1 - (u + 0.5) / W) * 2 pi - pi
        x = r cos(phi_v) cos(yaw),  y = r cos(phi_v) sin(yaw)
        z = delta_v - r sin(phi_v)

    Returns an (N, 3) array, N = number of valid pixels, row-major pixel
    order.
    """
    calib = img.calibration
    rows, cols = np.nonzero(np.isfinite(img.values))
    if len(rows) == 0:
        return np.zeros((0, 3))
    r = img.values[rows, cols]
    yaw = (1.0 - (cols + 0.5) / calib.width) * 2.0 * np.pi - np.pi
    pitch = calib.phi[rows]
    rho = r * np.cos(pitch)
    return np.stack(
        [rho * np.cos(yaw), rho * np.sin(yaw), calib.delta[rows] - r * np.sin(pitch)],
        axis=1,
    )


def load_scan(path, fmt: str) -> np.ndarray:
    """Load a point cloud from disk.

    fmt 'kitti-bin': flat little-endian float32 records (x, y, z,
    intensity); intensity is discarded.  fmt 'xyz-text': one 'x y z'
    triple per line, whitespace separated.
    """
    if fmt == "kitti-bin":
        return _load_kitti_bin(path)
    if fmt == "xyz-text":
        return _load_xyz_text(path)
    raise ConfigError(f"unknown scan format {fmt!r}")


def detect_scan_format(path) -> str:
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".bin":
        return "kitti-bin"
    if ext in (".txt", ".xyz"):
        return "xyz-text"
    raise ConfigError(
        f"cannot infer scan format from {path!r}; expected .bin, .txt or .xyz"
    )


def _load_kitti_bin(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise ParseError(f"scan file not found: {path}") from None
    tail = len(blob) % KITTI_RECORD_BYTES
    if tail:
        raise ParseError(
            f"{path}: truncated record at byte offset {len(blob) - tail}"
        )
    if not blob:
        return np.zeros((0, 3))
    records = np.frombuffer(blob, dtype="<f4").reshape(-1, 4)
    points = records[:, :3].astype(np.float64)
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise InputError(f"{path}: point {idx} has non-finite coordinates")
    return points


def _load_xyz_text(path) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except FileNotFoundError:
        raise ParseError(f"scan file not found: {path}") from None
    rows = []
    for lineno, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 3:
            raise ParseError(
                f"{path}:{lineno}: expected 3 fields, got {len(fields)}"
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            raise ParseError(f"{path}:{lineno}: not a number: {line.strip()!r}") from None
    if not rows:
        return np.zeros((0, 3))
    points = np.asarray(rows, dtype=np.float64)
    bad = ~np.isfinite(points).all(axis=1)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise InputError(f"{path}: point {idx} has non-finite coordinates")
    return points


def rimg_bytes(img: RangeImage) -> bytes:
    """Serialize to the binary range-image format.

    Layout: 8-byte header (magic 'RIMG', u16 height, u16 width, little
    endian) then H*W little-endian float32 ranges, row-major, holes as 0.
    """
    h, w = img.shape
    if h > 0xFFFF or w > 0xFFFF:
        raise InputError(f"image {h}x{w} too large for RIMG header")
    header = struct.pack("<4sHH", RIMG_MAGIC, h, w)
    payload = np.nan_to_num(img.values, nan=0.0).astype("<f4").tobytes()
    return header + payload


def save_rimg(img: RangeImage, path) -> None:
    from ._util import atomic_write_bytes

    atomic_write_bytes(path, rimg_bytes(img))


def load_rimg(path, calib: BeamCalibration) -> RangeImage:
    """Read an RIMG file; zeros become holes.  Dimensions must match the
    given calibration.  Stored ranges are clipped to r_max to absorb
    float32 quantization."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise ParseError(f"range image not found: {path}") from None
    if len(blob) < 8 or blob[:4] != RIMG_MAGIC:
        raise ParseError(f"{path}: not an RIMG file")
    _, h, w = struct.unpack("<4sHH", blob[:8])
    expected = 8 + 4 * h * w
    if len(blob) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, got {len(blob)}")
    flat = np.frombuffer(blob, dtype="<f4", offset=8).astype(np.float64)
    values = flat.reshape(h, w)
    values = np.where(values == 0.0, np.nan, np.minimum(values, calib.r_max))
    if (h, w) != (calib.height, calib.width):
        raise InputError(
            f"{path}: image is {h}x{w} but calibration is "
            f"{calib.height}x{calib.width}"
        )
    return RangeImage(values=values, calibration=calib)


def ply_text(cloud) -> str:
    """ASCII PLY with a single vertex element (properties x y z)."""
    points = _check_points(cloud)
    out = io.StringIO()
    out.write("ply\nformat ascii 1.0\n")
    out.write(f"element vertex {len(points)}\n")
    out.write("property float x\nproperty float y\nproperty float z\n")
    out.write("end_header\n")
    for x, y, z in points:
        out.write(f"{x:.6f} {y:.6f} {z:.6f}\n")
    return out.getvalue()


def save_ply(cloud, path) -> None:
    from ._util import atomic_write_text

    atomic_write_text(path, ply_text(cloud))


def range_png_bytes(img: RangeImage) -> bytes:
    """16-bit grayscale PNG: range maps linearly onto [1, 65535], holes 0.

    Visualization only; the quantization is lossy.
    """
    from PIL import Image

    norm = img.values / img.calibration.r_max
    gray = np.where(
        np.isfinite(norm), np.rint(1.0 + np.clip(norm, 0.0, 1.0) * 65534.0), 0.0
    ).astype(np.uint16)
    buf = io.BytesIO()
    Image.fromarray(gray).save(buf, format="PNG")
    return buf.getvalue()


def save_range_png(img: RangeImage, path) -> None:
    from ._util import atomic_write_bytes

    atomic_write_bytes(path, range_png_bytes(img))


def interpolate_calibration(
    calib: BeamCalibration, factor_v: int, factor_h: int
) -> BeamCalibration:
    """Calibration for an image upsampled by (factor_v, factor_h).

    Beam angles and offsets for the factor_v * H output rows are read at
    fractional source indices j / factor_v: original beams survive at
    multiples of factor_v, the gaps get factor_v - 1 interpolated beams,
    and indices past the last source beam extrapolate along the last gap
    so the fan stays strictly monotonic.
    """
    h = calib.height
    idx = np.arange(h * factor_v) / factor_v
    phi = _interp_extrapolate(idx, calib.phi)
    delta = _interp_extrapolate(idx, calib.delta)
    return BeamCalibration(
        phi=phi, delta=delta, r_max=calib.r_max, width=calib.width * factor_h
    )


def _interp_extrapolate(idx: np.ndarray, samples: np.ndarray) -> np.ndarray:
    base = np.interp(idx, np.arange(len(samples)), samples)
    slope = samples[-1] - samples[-2]
    past = idx > len(samples) - 1
    base[past] = samples[-1] + (idx[past] - (len(samples) - 1)) * slope
    return base


def angular_bounds(calib: BeamCalibration):
    """(low, high) inclination interval covered by the beam fan."""
    return float(calib.phi[-1]), float(calib.phi[0])


def brute_force_rows(cloud, calib: BeamCalibration) -> np.ndarray:
    """Reference row assignment: scan every beam per point, first minimum
    wins.  Kept as the oracle for the vectorized voting in project()."""
    points = _check_points(cloud)
    rows = np.empty(len(points), dtype=np.int64)
    for i, (x, y, z) in enumerate(points):
        rho = math.hypot(x, y)
        best, best_err = 0, float("inf")
        for b in range(calib.height):
            err = abs(calib.phi[b] - math.atan2(calib.delta[b] - z, rho))
            if err < best_err:
                best, best_err = b, err
        rows[i] = best
    return rows
