"""Tensor primitives and composite network blocks.

All feature maps are dense row-major arrays shaped (channels, height,
width), float64 during compute.  Blocks are pure functions of (input,
weights); nothing here mutates its arguments.

The composite blocks:

  patch_embed   non-overlapping (P1, P2) convolution + layer norm
  vss_block     m = ss2d(LN(x)) + x; out = ffn(LN(m)) + m
  downsample    2x2 stride-2 convolution, doubling channels
  pixel_shuffle channel-to-space bijection for integer upsampling
"""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, InputError
from .ssm import SelectiveProjections, ss2d

LAYER_NORM_EPS = 1e-5
FFN_EXPANSION = 2


def _as_chw(name, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise InputError(f"{name} must be (C, H, W), got shape {x.shape}")
    return x


def silu(x):
    """x * sigmoid(x), evaluated stably on both tails."""
    x = np.asarray(x, dtype=np.float64)
    t = np.exp(-np.abs(x))  # in (0, 1], never overflows
    return x * np.where(x >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def conv2d(x, weight, bias=None, stride=(1, 1), padding=(0, 0)):
    """Cross-correlation with zero padding.

    x: (C_in, H, W); weight: (C_out, C_in, KH, KW); bias: (C_out,) or None.
    Output spatial extent floor((in + 2p - k)/stride) + 1 per axis.
    """
    x = _as_chw("x", x)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 4:
        raise InputError(f"weight must be 4-D, got shape {weight.shape}")
    c_out, c_in, kh, kw = weight.shape
    if x.shape[0] != c_in:
        raise InputError(
            f"input has {x.shape[0]} channels, kernel expects {c_in}"
        )
    sv, sh = stride
    pv, ph = padding
    if pv or ph:
        x = np.pad(x, ((0, 0), (pv, pv), (ph, ph)))
    if x.shape[1] < kh or x.shape[2] < kw:
        raise InputError(
            f"padded input {x.shape[1:]} smaller than kernel ({kh}, {kw})"
        )
    windows = sliding_window_view(x, (kh, kw), axis=(1, 2))[:, ::sv, ::sh]
    out = np.einsum("cijuv,ocuv->oij", windows, weight, optimize=True)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[:, None, None]
    return out


def pointwise(x, weight, bias=None):
    """1x1 convolution; weight is (C_out, C_in)."""
    x = _as_chw("x", x)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.ndim != 2 or weight.shape[1] != x.shape[0]:
        raise InputError(
            f"pointwise weight {weight.shape} does not match "
            f"{x.shape[0]} input channels"
        )
    out = np.tensordot(weight, x, axes=([1], [0]))
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[:, None, None]
    return out


def depthwise_conv3x3(x, weight, bias=None):
    """Per-channel 3x3 convolution with same zero padding.

    weight: (C, 3, 3).
    """
    x = _as_chw("x", x)
    weight = np.asarray(weight, dtype=np.float64)
    if weight.shape != (x.shape[0], 3, 3):
        raise InputError(
            f"depthwise weight must be ({x.shape[0]}, 3, 3), "
            f"got {weight.shape}"
        )
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    windows = sliding_window_view(xp, (3, 3), axis=(1, 2))
    out = np.einsum("cijuv,cuv->cij", windows, weight, optimize=True)
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float64)[:, None, None]
    return out


def layer_norm(x, scale, offset):
    """Normalize over the channel axis per spatial location, then affine."""
    x = _as_chw("x", x)
    scale = np.asarray(scale, dtype=np.float64)
    offset = np.asarray(offset, dtype=np.float64)
    if scale.shape != (x.shape[0],) or offset.shape != (x.shape[0],):
        raise InputError(
            f"scale/offset must have shape ({x.shape[0]},), got "
            f"{scale.shape} and {offset.shape}"
        )
    mean = x.mean(axis=0)
    var = x.var(axis=0)
    normed = (x - mean) / np.sqrt(var + LAYER_NORM_EPS)
    return scale[:, None, None] * normed + offset[:, None, None]


def patch_embed(img, patch, weight, bias, scale, offset):
    """Split a 1-channel image into (P1, P2) patches and project to D.

    Convolution with kernel = stride = (P1, P2), followed by layer_norm.
    Output shape (D, H/P1, W/P2).
    """
    img = _as_chw("img", img)
    p1, p2 = patch
    if img.shape[1] % p1 or img.shape[2] % p2:
        raise ConfigError(
            f"image dims {img.shape[1:]} not divisible by patch ({p1}, {p2})"
        )
    emb = conv2d(img, weight, bias, stride=(p1, p2))
    return layer_norm(emb, scale, offset)


@dataclass(frozen=True)
class FfnWeights:
    """Pointwise expand -> depthwise 3x3 -> SiLU -> pointwise project."""

    w_in: np.ndarray   # (hidden, C)
    b_in: np.ndarray   # (hidden,)
    w_dw: np.ndarray   # (hidden, 3, 3)
    b_dw: np.ndarray   # (hidden,)
    w_out: np.ndarray  # (C, hidden)
    b_out: np.ndarray  # (C,)


def ffn(x, w: FfnWeights):
    h = pointwise(x, w.w_in, w.b_in)
    h = depthwise_conv3x3(h, w.w_dw, w.b_dw)
    h = silu(h)
    return pointwise(h, w.w_out, w.b_out)


@dataclass(frozen=True)
class VssWeights:
    norm1_scale: np.ndarray
    norm1_offset: np.ndarray
    branches: tuple  # 4x SelectiveProjections, one per ScanDirection
    norm2_scale: np.ndarray
    norm2_offset: np.ndarray
    ffn: FfnWeights

    @classmethod
    def from_mapping(cls, m) -> "VssWeights":
        """Assemble from a flat {tensor name: array} mapping."""
        branches = tuple(
            SelectiveProjections(
                a=m[f"scan{k}.a"],
                d=m[f"scan{k}.d"],
                w_b=m[f"scan{k}.w_b"],
                b_b=m[f"scan{k}.b_b"],
                w_c=m[f"scan{k}.w_c"],
                b_c=m[f"scan{k}.b_c"],
                w_delta=m[f"scan{k}.w_delta"],
                b_delta=m[f"scan{k}.b_delta"],
            )
            for k in range(4)
        )
        return cls(
            norm1_scale=m["norm1.scale"],
            norm1_offset=m["norm1.offset"],
            branches=branches,
            norm2_scale=m["norm2.scale"],
            norm2_offset=m["norm2.offset"],
            ffn=FfnWeights(
                w_in=m["ffn.w_in"],
                b_in=m["ffn.b_in"],
                w_dw=m["ffn.w_dw"],
                b_dw=m["ffn.b_dw"],
                w_out=m["ffn.w_out"],
                b_out=m["ffn.b_out"],
            ),
        )


def vss_block(x, w: VssWeights):
    """Double-residual block: m = ss2d(LN(x)) + x; out = ffn(LN(m)) + m.

    The four-direction scan runs exactly once per call; its result is
    reused for both the residual and the feed-forward input.
    """
    x = _as_chw("x", x)
    m = ss2d(layer_norm(x, w.norm1_scale, w.norm1_offset), w.branches) + x
    out = ffn(layer_norm(m, w.norm2_scale, w.norm2_offset), w.ffn) + m
    assert np.isfinite(out).all(), "vss_block produced non-finite values"
    return out


def downsample(x, weight, bias=None):
    """2x2 stride-2 convolution halving each spatial dim, doubling channels."""
    x = _as_chw("x", x)
    if x.shape[1] % 2 or x.shape[2] % 2:
        raise ConfigError(
            f"downsample needs even spatial dims, got {x.shape[1:]}"
        )
    weight = np.asarray(weight, dtype=np.float64)
    if weight.shape != (2 * x.shape[0], x.shape[0], 2, 2):
        raise InputError(
            f"downsample weight must be ({2 * x.shape[0]}, {x.shape[0]}, 2, 2), "
            f"got {weight.shape}"
        )
    return conv2d(x, weight, bias, stride=(2, 2))


def pixel_shuffle(x, factor_v, factor_h):
    """Move channel blocks into space: (C*gv*gh, h, w) -> (C, h*gv, w*gh).

    output[c][i*gv + dv][j*gh + dh] = input[c*gv*gh + dv*gh + dh][i][j];
    pure reindexing, no arithmetic on values.
    """
    x = _as_chw("x", x)
    gv, gh = int(factor_v), int(factor_h)
    if gv < 1 or gh < 1:
        raise ConfigError(f"shuffle factors must be >= 1, got ({gv}, {gh})")
    c_in, h, w = x.shape
    if c_in % (gv * gh):
        raise ConfigError(
            f"{c_in} channels not divisible by shuffle factor {gv}*{gh}"
        )
    c_out = c_in // (gv * gh)
    return (
        x.reshape(c_out, gv, gh, h, w)
        .transpose(0, 3, 1, 4, 2)
        .reshape(c_out, h * gv, w * gh)
    )


def pixel_unshuffle(x, factor_v, factor_h):
    """Inverse of pixel_shuffle: (C, h*gv, w*gh) -> (C*gv*gh, h, w)."""
    x = _as_chw("x", x)
    gv, gh = int(factor_v), int(factor_h)
    if gv < 1 or gh < 1:
        raise ConfigError(f"shuffle factors must be >= 1, got ({gv}, {gh})")
    c, hh, ww = x.shape
    if hh % gv or ww % gh:
        raise ConfigError(
            f"spatial dims {(hh, ww)} not divisible by factors ({gv}, {gh})"
        )
    h, w = hh // gv, ww // gh
    return (
        x.reshape(c, h, gv, w, gh)
        .transpose(0, 2, 4, 1, 3)
        .reshape(c * gv * gh, h, w)
    )
