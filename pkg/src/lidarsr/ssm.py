"""Diagonal state-space recurrences and the four-direction 2D scan.

The continuous system per channel, with diagonal state matrix,

    h'(t) = a h(t) + b x(t)
    y(t)  = <c, h(t)> + d x(t)

is discretized by zero-order hold over a step delta:

    a_bar = exp(delta a)
    b_bar = (exp(delta a) - 1) / a * b     -> delta b  as a -> 0

and then scanned sequentially.  The input-dependent variant recomputes
b, c and delta from the input at every timestep and uses the simplified
first-order form b_bar_t = delta_t * b_t; euler_discretize applies the
same simplification to a fixed parameter set so the two paths can be
compared directly.

2D feature maps are handled by unfolding the grid along four traversals
(row-major, column-major, and their reverses), scanning each as a 1-D
sequence, folding back, and summing.
"""

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InputError

TAYLOR_CUTOFF = 1e-8  # |a| below this uses the first-order limit for b_bar


class ScanDirection(enum.Enum):
    ROW_MAJOR_FORWARD = "row_major_forward"
    ROW_MAJOR_REVERSE = "row_major_reverse"
    COL_MAJOR_FORWARD = "col_major_forward"
    COL_MAJOR_REVERSE = "col_major_reverse"


def _as_2d(name, arr, dtype=np.float64):
    arr = np.asarray(arr, dtype=dtype)
    if arr.ndim != 2:
        raise InputError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class SsmParams:
    """Continuous-time parameters, one diagonal system per channel.

    a, b, c: (D, N); d: (D,); delta: (D,) positive time scales.
    Stability requires every entry of a to be strictly negative.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    delta: np.ndarray

    def __post_init__(self):
        a = _as_2d("a", self.a)
        b = _as_2d("b", self.b)
        c = _as_2d("c", self.c)
        d = np.asarray(self.d, dtype=np.float64)
        delta = np.asarray(self.delta, dtype=np.float64)
        for name, arr in (("a", a), ("b", b), ("c", c), ("d", d), ("delta", delta)):
            if not np.isfinite(arr).all():
                raise InputError(f"{name} contains non-finite entries")
        if not (b.shape == a.shape and c.shape == a.shape):
            raise InputError("a, b, c must share shape (D, N)")
        if d.shape != (a.shape[0],) or delta.shape != (a.shape[0],):
            raise InputError("d and delta must have shape (D,)")
        if not (a < 0).all():
            raise InputError("a entries must be negative for stability")
        if not (delta > 0).all():
            raise InputError("delta entries must be positive")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "delta", delta)

    @property
    def channels(self) -> int:
        return self.a.shape[0]

    @property
    def state_dim(self) -> int:
        return self.a.shape[1]


@dataclass(frozen=True)
class DiscreteSsm:
    """Discrete recurrence coefficients; a_bar in (0, 1) for stable input."""

    a_bar: np.ndarray
    b_bar: np.ndarray
    c: np.ndarray
    d: np.ndarray


def zoh_ab(a, b, delta):
    """Zero-order-hold (a_bar, b_bar) for diagonal a.

    Elementwise a_bar = exp(delta a) and b_bar = (exp(delta a) - 1)/a * b,
    switching to the analytic limit delta * b where |a| < 1e-8.  delta
    broadcasts over the state axis.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if a.ndim == 2:
        delta = delta[:, None]
    a_bar = np.exp(delta * a)
    small = np.abs(a) < TAYLOR_CUTOFF
    safe_a = np.where(small, 1.0, a)
    b_bar = np.where(small, delta * b, (a_bar - 1.0) / safe_a * b)
    return a_bar, b_bar


def zoh_discretize(p: SsmParams) -> DiscreteSsm:
    """Exact zero-order-hold discretization of p."""
    a_bar, b_bar = zoh_ab(p.a, p.b, p.delta)
    return DiscreteSsm(a_bar=a_bar, b_bar=b_bar, c=p.c.copy(), d=p.d.copy())


def euler_discretize(p: SsmParams) -> DiscreteSsm:
    """Simplified discretization: a_bar as in ZOH but b_bar = delta * b.

    This is the form the input-dependent scan uses per timestep, exposed
    for fixed parameters so selective_scan_1d can be checked against
    scan_1d on a degenerate configuration.
    """
    a_bar = np.exp(p.delta[:, None] * p.a)
    b_bar = p.delta[:, None] * p.b
    return DiscreteSsm(a_bar=a_bar, b_bar=b_bar, c=p.c.copy(), d=p.d.copy())


def scan_1d(ssm: DiscreteSsm, x) -> np.ndarray:
    """Run the discrete recurrence over a (D, L) sequence, h_0 = 0."""
    x = _as_2d("x", x)
    d_ch, n = ssm.a_bar.shape
    if x.shape[0] != d_ch:
        raise InputError(
            f"x has {x.shape[0]} channels but the system has {d_ch}"
        )
    return kernels.lti_scan(
        np.ascontiguousarray(ssm.a_bar),
        np.ascontiguousarray(ssm.b_bar),
        np.ascontiguousarray(ssm.c),
        np.ascontiguousarray(ssm.d),
        np.ascontiguousarray(x),
    )


@dataclass(frozen=True)
class SelectiveProjections:
    """Learned maps that turn the input into per-timestep parameters.

    From x_t (the D-vector at timestep t):

        b_t     = w_b @ x_t + b_b          (N,)
        c_t     = w_c @ x_t + b_c          (N,)
        delta_t = softplus(w_delta @ x_t + b_delta)   (D,)

    a (D, N) and d (D,) stay fixed across timesteps.
    """

    a: np.ndarray
    d: np.ndarray
    w_b: np.ndarray
    b_b: np.ndarray
    w_c: np.ndarray
    b_c: np.ndarray
    w_delta: np.ndarray
    b_delta: np.ndarray

    def __post_init__(self):
        a = _as_2d("a", self.a)
        if not (a < 0).all():
            raise InputError("a entries must be negative for stability")
        d_ch, n = a.shape
        arrays = {
            "d": (np.asarray(self.d, dtype=np.float64), (d_ch,)),
            "w_b": (np.asarray(self.w_b, dtype=np.float64), (n, d_ch)),
            "b_b": (np.asarray(self.b_b, dtype=np.float64), (n,)),
            "w_c": (np.asarray(self.w_c, dtype=np.float64), (n, d_ch)),
            "b_c": (np.asarray(self.b_c, dtype=np.float64), (n,)),
            "w_delta": (np.asarray(self.w_delta, dtype=np.float64), (d_ch, d_ch)),
            "b_delta": (np.asarray(self.b_delta, dtype=np.float64), (d_ch,)),
        }
        object.__setattr__(self, "a", a)
        for name, (arr, shape) in arrays.items():
            if arr.shape != shape:
                raise InputError(f"{name} must have shape {shape}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise InputError(f"{name} contains non-finite entries")
            object.__setattr__(self, name, arr)

    @property
    def channels(self) -> int:
        return self.a.shape[0]

    @classmethod
    def constant(cls, a, b, c, d, delta) -> "SelectiveProjections":
        """Degenerate configuration producing fixed b_t, c_t, delta_t.

        b, c are (N,) vectors shared by all channels; delta is the (D,)
        positive time scale, realized through the softplus bias.
        """
        a = _as_2d("a", a)
        d_ch, n = a.shape
        delta = np.asarray(delta, dtype=np.float64)
        if (delta <= 0).any():
            raise InputError("delta entries must be positive")
        return cls(
            a=a,
            d=np.asarray(d, dtype=np.float64),
            w_b=np.zeros((n, d_ch)),
            b_b=np.asarray(b, dtype=np.float64),
            w_c=np.zeros((n, d_ch)),
            b_c=np.asarray(c, dtype=np.float64),
            w_delta=np.zeros((d_ch, d_ch)),
            b_delta=inverse_softplus(delta),
        )


def softplus(x):
    """log(1 + e^x), stable for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def inverse_softplus(y):
    """x with softplus(x) = y, y > 0."""
    y = np.asarray(y, dtype=np.float64)
    return np.log(np.expm1(y))


def selective_scan_1d(x, proj: SelectiveProjections) -> np.ndarray:
    """Input-dependent scan over a (D, L) sequence, h_0 = 0.

    Per timestep: a_bar_t = exp(delta_t a), h_t = a_bar_t h_{t-1} +
    (delta_t b_t) x_t, y_t = <c_t, h_t> + d x_t.
    """
    x = _as_2d("x", x)
    if x.shape[0] != proj.channels:
        raise InputError(
            f"x has {x.shape[0]} channels but the projections have "
            f"{proj.channels}"
        )
    x = np.ascontiguousarray(x)
    b_t = proj.w_b @ x + proj.b_b[:, None]  # (N, L)
    c_t = proj.w_c @ x + proj.b_c[:, None]  # (N, L)
    delta_t = softplus(proj.w_delta @ x + proj.b_delta[:, None])  # (D, L)
    return kernels.selective_scan(
        np.ascontiguousarray(proj.a),
        np.ascontiguousarray(proj.d),
        np.ascontiguousarray(delta_t),
        np.ascontiguousarray(b_t),
        np.ascontiguousarray(c_t),
        x,
    )


def traversal_indices(direction: ScanDirection, height: int, width: int) -> np.ndarray:
    """Flat grid indices visited by a traversal, in visit order.

    Row-major forward reads rows top to bottom, left to right; column-
    major forward reads columns left to right, top to bottom; the reverse
    directions visit exactly the opposite order.
    """
    if height < 1 or width < 1:
        raise InputError(f"grid must be at least 1x1, got {height}x{width}")
    flat = np.arange(height * width)
    if direction is ScanDirection.ROW_MAJOR_FORWARD:
        return flat
    if direction is ScanDirection.ROW_MAJOR_REVERSE:
        return flat[::-1].copy()
    col_major = flat.reshape(height, width).T.reshape(-1).copy()
    if direction is ScanDirection.COL_MAJOR_FORWARD:
        return col_major
    return col_major[::-1].copy()


def ss2d(x, branches) -> np.ndarray:
    """Four-direction unfold / scan / fold / sum over a (D, H, W) map.

    branches: one SelectiveProjections per ScanDirection, in enum order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise InputError(f"x must be (D, H, W), got shape {x.shape}")
    branches = list(branches)
    if len(branches) != 4:
        raise InputError(f"expected 4 branch parameter sets, got {len(branches)}")
    d_ch, h, w = x.shape
    flat = x.reshape(d_ch, h * w)
    out = np.zeros_like(flat)
    for direction, proj in zip(ScanDirection, branches):
        idx = traversal_indices(direction, h, w)
        seq = flat[:, idx]
        scanned = selective_scan_1d(seq, proj)
        refolded = np.empty_like(scanned)
        refolded[:, idx] = scanned
        out += refolded
    return out.reshape(d_ch, h, w)
