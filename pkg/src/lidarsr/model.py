"""Asymmetric encoder-decoder that super-resolves a range image.

The network patch-embeds the normalized range image, runs a stack of
state-space (VSS) blocks per encoder stage with 2x2 downsampling between
stages, then mirrors the spatial schedule on the way up: each decoder
level doubles resolution with a pixel shuffle, concatenates the matching
encoder skip, fuses with a 1x1 convolution and applies one VSS block.
A final shuffle head carries the extra (s_v, s_h) super-resolution
factor, so total upsampling exceeds total downsampling by exactly the
requested scale.

Weights live in an ordered {block path: {tensor name: float32 array}}
mapping and serialize to a single file: magic "LSRW", a JSON manifest
(config + ordered tensor names/shapes), the concatenated little-endian
float32 payload, and a trailing SHA-256 over everything before it.
"""

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from . import blocks
from ._util import atomic_write_bytes
from .blocks import VssWeights
from .errors import (
    ConfigError,
    NumericalError,
    ParseError,
    WeightCorruptionError,
    WeightMismatchError,
)
from .geometry import RangeImage, interpolate_calibration

WEIGHTS_MAGIC = b"LSRW"
_CHECKSUM_BYTES = 32  # SHA-256

# named initialization schemes used by weight_spec / build
_INIT_UNIFORM = "uniform"      # zero-mean uniform, half-width 1/sqrt(fan_in)
_INIT_ZEROS = "zeros"
_INIT_ONES = "ones"
_INIT_LADDER = "ladder"        # a[c, n] = -(n + 1)
_INIT_DELTA_BIAS = "delta_bias"  # softplus^-1 of log-uniform [0.01, 0.1]


@dataclass(frozen=True)
class NetworkConfig:
    """Architecture hyperparameters.

    depths: VSS blocks per encoder stage (>= 2 stages).
    base_dim: channel width after patch embedding; doubles per stage.
    patch: (P1, P2) patch size of the embedding convolution.
    upscale: (s_v, s_h) super-resolution factor carried by the head.
    ssm_state: state dimension N of every scan branch.
    input_dims: (H, W) of the range image the model accepts.
    """

    depths: tuple = (2, 2, 2, 2)
    base_dim: int = 16
    patch: tuple = (1, 4)
    upscale: tuple = (4, 1)
    ssm_state: int = 8
    input_dims: tuple = (16, 1024)

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "patch", tuple(int(p) for p in self.patch))
        object.__setattr__(self, "upscale", tuple(int(s) for s in self.upscale))
        object.__setattr__(self, "input_dims", tuple(int(v) for v in self.input_dims))
        if len(self.depths) < 2:
            raise ConfigError(f"need at least 2 stages, got depths {self.depths}")
        if any(d < 1 for d in self.depths):
            raise ConfigError(f"every stage needs >= 1 block, got {self.depths}")
        if self.base_dim < 2 or self.base_dim % 2:
            raise ConfigError(
                f"base_dim must be even and >= 2 (the top decoder shuffle "
                f"regroups 2*base_dim channels into 2x2 blocks), got "
                f"{self.base_dim}"
            )
        if len(self.patch) != 2 or any(p < 1 for p in self.patch):
            raise ConfigError(f"patch must be two factors >= 1, got {self.patch}")
        if len(self.upscale) != 2 or any(s < 1 for s in self.upscale):
            raise ConfigError(f"upscale must be two factors >= 1, got {self.upscale}")
        if self.ssm_state < 1:
            raise ConfigError(f"ssm_state must be >= 1, got {self.ssm_state}")
        if len(self.input_dims) != 2 or any(v < 1 for v in self.input_dims):
            raise ConfigError(f"input_dims must be positive, got {self.input_dims}")
        h, w = self.input_dims
        p1, p2 = self.patch
        shrink = 2 ** (self.stages - 1)
        if h % (p1 * shrink):
            raise ConfigError(
                f"height {h} not divisible by patch {p1} * 2^(stages-1) = "
                f"{p1 * shrink}"
            )
        if w % (p2 * shrink):
            raise ConfigError(
                f"width {w} not divisible by patch {p2} * 2^(stages-1) = "
                f"{p2 * shrink}"
            )

    @property
    def stages(self) -> int:
        return len(self.depths)

    @property
    def output_dims(self) -> tuple:
        return (self.upscale[0] * self.input_dims[0],
                self.upscale[1] * self.input_dims[1])

    @property
    def head_factors(self) -> tuple:
        """Shuffle factors of the head: patch stride times upscale per axis.

        The embedding divides (H, W) by (P1, P2) and the decoder restores
        only that grid, so the head must supply s_v*P1 and s_h*P2 to land
        on (s_v*H, s_h*W).
        """
        return (self.upscale[0] * self.patch[0],
                self.upscale[1] * self.patch[1])

    def stage_dim(self, i: int) -> int:
        return self.base_dim * (2 ** i)

    def to_dict(self) -> dict:
        return {
            "depths": list(self.depths),
            "base_dim": self.base_dim,
            "patch": list(self.patch),
            "upscale": list(self.upscale),
            "ssm_state": self.ssm_state,
            "input_dims": list(self.input_dims),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkConfig":
        known = {"depths", "base_dim", "patch", "upscale", "ssm_state",
                 "input_dims"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config fields: {sorted(extra)}")
        missing = known - set(d)
        if missing:
            raise ConfigError(f"missing config fields: {sorted(missing)}")
        return cls(
            depths=tuple(d["depths"]),
            base_dim=d["base_dim"],
            patch=tuple(d["patch"]),
            upscale=tuple(d["upscale"]),
            ssm_state=d["ssm_state"],
            input_dims=tuple(d["input_dims"]),
        )


@dataclass(frozen=True)
class TensorSpec:
    block: str
    name: str
    shape: tuple
    init: str
    fan_in: int = 0

    @property
    def key(self) -> str:
        return f"{self.block}/{self.name}"


def _vss_specs(block: str, dim: int, n_state: int):
    """Tensor layout of one VSS block at channel width dim."""
    hidden = blocks.FFN_EXPANSION * dim
    specs = [
        TensorSpec(block, "norm1.scale", (dim,), _INIT_ONES),
        TensorSpec(block, "norm1.offset", (dim,), _INIT_ZEROS),
    ]
    for k in range(4):
        specs += [
            TensorSpec(block, f"scan{k}.a", (dim, n_state), _INIT_LADDER),
            TensorSpec(block, f"scan{k}.d", (dim,), _INIT_ONES),
            TensorSpec(block, f"scan{k}.w_b", (n_state, dim), _INIT_UNIFORM, dim),
            TensorSpec(block, f"scan{k}.b_b", (n_state,), _INIT_ZEROS),
            TensorSpec(block, f"scan{k}.w_c", (n_state, dim), _INIT_UNIFORM, dim),
            TensorSpec(block, f"scan{k}.b_c", (n_state,), _INIT_ZEROS),
            TensorSpec(block, f"scan{k}.w_delta", (dim, dim), _INIT_UNIFORM, dim),
            TensorSpec(block, f"scan{k}.b_delta", (dim,), _INIT_DELTA_BIAS),
        ]
    specs += [
        TensorSpec(block, "norm2.scale", (dim,), _INIT_ONES),
        TensorSpec(block, "norm2.offset", (dim,), _INIT_ZEROS),
        TensorSpec(block, "ffn.w_in", (hidden, dim), _INIT_UNIFORM, dim),
        TensorSpec(block, "ffn.b_in", (hidden,), _INIT_ZEROS),
        TensorSpec(block, "ffn.w_dw", (hidden, 3, 3), _INIT_UNIFORM, 9),
        TensorSpec(block, "ffn.b_dw", (hidden,), _INIT_ZEROS),
        TensorSpec(block, "ffn.w_out", (dim, hidden), _INIT_UNIFORM, hidden),
        TensorSpec(block, "ffn.b_out", (dim,), _INIT_ZEROS),
    ]
    return specs


def weight_spec(cfg: NetworkConfig):
    """Ordered tensor layout of the whole network for cfg.

    The order is the build/serialization order; rebuilding this list is
    how load_weights validates a manifest.
    """
    d0 = cfg.base_dim
    n = cfg.ssm_state
    p1, p2 = cfg.patch
    specs = [
        TensorSpec("patch_embed", "conv.weight", (d0, 1, p1, p2),
                   _INIT_UNIFORM, p1 * p2),
        TensorSpec("patch_embed", "conv.bias", (d0,), _INIT_ZEROS),
        TensorSpec("patch_embed", "norm.scale", (d0,), _INIT_ONES),
        TensorSpec("patch_embed", "norm.offset", (d0,), _INIT_ZEROS),
    ]
    for i, depth in enumerate(cfg.depths):
        dim = cfg.stage_dim(i)
        for j in range(depth):
            specs += _vss_specs(f"encoder.{i}.block.{j}", dim, n)
        if i < cfg.stages - 1:
            specs += [
                TensorSpec(f"encoder.{i}.down", "conv.weight",
                           (2 * dim, dim, 2, 2), _INIT_UNIFORM, 4 * dim),
                TensorSpec(f"encoder.{i}.down", "conv.bias",
                           (2 * dim,), _INIT_ZEROS),
            ]
    for level in range(cfg.stages - 2, -1, -1):
        dim = cfg.stage_dim(level)
        # shuffled channels (2*dim/4) plus the skip (dim)
        fused_in = dim // 2 + dim
        specs += [
            TensorSpec(f"decoder.{level}.fuse", "weight", (dim, fused_in),
                       _INIT_UNIFORM, fused_in),
            TensorSpec(f"decoder.{level}.fuse", "bias", (dim,), _INIT_ZEROS),
        ]
        specs += _vss_specs(f"decoder.{level}.block", dim, n)
    fv, fh = cfg.head_factors
    specs += [
        TensorSpec("head", "expand.weight", (fv * fh, d0), _INIT_UNIFORM, d0),
        TensorSpec("head", "expand.bias", (fv * fh,), _INIT_ZEROS),
        TensorSpec("head", "out.weight", (1, 1), _INIT_UNIFORM, 1),
        TensorSpec("head", "out.bias", (1,), _INIT_ZEROS),
    ]
    return specs


def build(cfg: NetworkConfig, seed: int) -> dict:
    """Deterministic weight construction: same (cfg, seed), same bits.

    Convolution/linear weights draw from a zero-mean uniform with
    half-width 1/sqrt(fan_in); norm scales start at 1, every bias and
    norm offset at 0; scan state coefficients use the -(1..N) ladder
    with unit skip terms, and the time-scale bias is set so softplus
    lands log-uniformly in [0.01, 0.1].  Tensors are stored float32.
    """
    rng = np.random.default_rng(seed)
    weights: dict = {}
    for spec in weight_spec(cfg):
        if spec.init == _INIT_UNIFORM:
            half = 1.0 / np.sqrt(spec.fan_in)
            arr = rng.uniform(-half, half, size=spec.shape)
        elif spec.init == _INIT_ZEROS:
            arr = np.zeros(spec.shape)
        elif spec.init == _INIT_ONES:
            arr = np.ones(spec.shape)
        elif spec.init == _INIT_LADDER:
            dim, n_state = spec.shape
            arr = -np.tile(np.arange(1.0, n_state + 1.0), (dim, 1))
        elif spec.init == _INIT_DELTA_BIAS:
            dt = np.exp(rng.uniform(np.log(0.01), np.log(0.1), size=spec.shape))
            arr = np.log(np.expm1(dt))
        else:  # pragma: no cover - spec initializers are closed above
            raise ConfigError(f"unknown initializer {spec.init}")
        weights.setdefault(spec.block, {})[spec.name] = arr.astype(np.float32)
    return weights


def param_count(weights: dict) -> int:
    return sum(t.size for block in weights.values() for t in block.values())


def check_weights(weights: dict, cfg: NetworkConfig) -> None:
    """Verify the weight key set matches cfg exactly (names and shapes)."""
    expected = weight_spec(cfg)
    have = {
        f"{bp}/{tn}": t.shape
        for bp, block in weights.items()
        for tn, t in block.items()
    }
    for spec in expected:
        if spec.key not in have:
            raise ConfigError(f"weights are missing tensor {spec.key}")
        if tuple(have.pop(spec.key)) != spec.shape:
            raise ConfigError(
                f"tensor {spec.key} has shape {tuple(weights[spec.block][spec.name].shape)}, "
                f"config demands {spec.shape}"
            )
    if have:
        raise ConfigError(f"weights contain unexpected tensor {sorted(have)[0]}")


def _run(path: str, fn, *args) -> np.ndarray:
    """Run one block, converting any non-finite outcome to a typed error
    that names the block."""
    try:
        out = fn(*args)
    except AssertionError as exc:
        raise NumericalError(f"non-finite activation after {path}") from exc
    if not np.isfinite(out).all():
        raise NumericalError(f"non-finite activation after {path}")
    return out


def forward(img: RangeImage, weights: dict, cfg: NetworkConfig) -> RangeImage:
    """Run inference: (H, W) range image in, (s_v*H, s_h*W) out.

    Input ranges are normalized by r_max with holes as 0.  The output
    has no holes: values are clamped to (0, r_max], the floor being the
    smallest positive normalized float32 step times r_max.  The output
    calibration interpolates s_v*H beams from the input fan.
    """
    if img.shape != cfg.input_dims:
        raise ConfigError(
            f"image dims {img.shape} do not match config input_dims "
            f"{cfg.input_dims}"
        )
    check_weights(weights, cfg)
    r_max = img.calibration.r_max
    x = np.nan_to_num(img.values / r_max, nan=0.0)[None, :, :]

    pe = weights["patch_embed"]
    feat = _run("patch_embed", blocks.patch_embed,
                x, cfg.patch, pe["conv.weight"], pe["conv.bias"],
                pe["norm.scale"], pe["norm.offset"])

    skips = []
    for i, depth in enumerate(cfg.depths):
        for j in range(depth):
            path = f"encoder.{i}.block.{j}"
            feat = _run(path, blocks.vss_block, feat,
                        VssWeights.from_mapping(weights[path]))
        if i < cfg.stages - 1:
            skips.append(feat)
            path = f"encoder.{i}.down"
            feat = _run(path, blocks.downsample, feat,
                        weights[path]["conv.weight"],
                        weights[path]["conv.bias"])

    for level in range(cfg.stages - 2, -1, -1):
        feat = blocks.pixel_shuffle(feat, 2, 2)
        skip = skips[level]
        if feat.shape[1:] != skip.shape[1:]:
            raise NumericalError(
                f"decoder level {level}: upsampled dims {feat.shape[1:]} do "
                f"not match skip dims {skip.shape[1:]}"
            )
        feat = np.concatenate([feat, skip], axis=0)
        path = f"decoder.{level}.fuse"
        feat = _run(path, blocks.pointwise, feat,
                    weights[path]["weight"], weights[path]["bias"])
        path = f"decoder.{level}.block"
        feat = _run(path, blocks.vss_block, feat,
                    VssWeights.from_mapping(weights[path]))

    head = weights["head"]
    feat = _run("head.expand", blocks.pointwise, feat,
                head["expand.weight"], head["expand.bias"])
    fv, fh = cfg.head_factors
    feat = blocks.pixel_shuffle(feat, fv, fh)
    feat = _run("head.out", blocks.pointwise, feat,
                head["out.weight"], head["out.bias"])

    floor = float(np.finfo(np.float32).tiny)
    out = np.clip(feat[0], floor, 1.0) * r_max
    calib = interpolate_calibration(img.calibration, *cfg.upscale)
    return RangeImage(values=out, calibration=calib)


def _assemble(manifest_bytes: bytes, payload: bytes) -> bytes:
    body = WEIGHTS_MAGIC + struct.pack("<I", len(manifest_bytes))
    body += manifest_bytes + payload
    return body + hashlib.sha256(body).digest()


def save_weights(weights: dict, cfg: NetworkConfig, path) -> None:
    """Write the single-file weight format (see module docstring)."""
    check_weights(weights, cfg)
    specs = weight_spec(cfg)
    manifest = {
        "config": cfg.to_dict(),
        "tensors": [{"name": s.key, "shape": list(s.shape)} for s in specs],
    }
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode("utf-8")
    payload = b"".join(
        np.ascontiguousarray(
            weights[s.block][s.name], dtype="<f4"
        ).tobytes()
        for s in specs
    )
    atomic_write_bytes(path, _assemble(manifest_bytes, payload))


def load_weights(path):
    """Read a weight file back into (weights, config).

    Checksum or structural damage raises a corruption error; a manifest
    whose tensor list disagrees with its own config raises an
    incompatibility error naming the first divergent tensor.
    """
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read weights file {path}: {exc}") from exc
    header = len(WEIGHTS_MAGIC) + 4
    if len(blob) < header + _CHECKSUM_BYTES:
        raise WeightCorruptionError(f"weights file {path} is too short")
    if blob[: len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise WeightCorruptionError(f"{path} is not a weights file (bad magic)")
    body, digest = blob[:-_CHECKSUM_BYTES], blob[-_CHECKSUM_BYTES:]
    if hashlib.sha256(body).digest() != digest:
        raise WeightCorruptionError(f"checksum mismatch in {path}")
    (manifest_len,) = struct.unpack_from("<I", blob, len(WEIGHTS_MAGIC))
    if header + manifest_len + _CHECKSUM_BYTES > len(blob):
        raise WeightCorruptionError(f"manifest length overruns file {path}")
    try:
        manifest = json.loads(blob[header : header + manifest_len])
    except ValueError as exc:
        raise WeightCorruptionError(f"unreadable manifest in {path}: {exc}") from exc
    try:
        cfg = NetworkConfig.from_dict(manifest["config"])
        entries = manifest["tensors"]
    except (KeyError, TypeError) as exc:
        raise WeightCorruptionError(f"incomplete manifest in {path}: {exc}") from exc

    specs = weight_spec(cfg)
    for i, spec in enumerate(specs):
        if i >= len(entries):
            raise WeightMismatchError(
                f"manifest ends early: config demands tensor {spec.key}"
            )
        got = entries[i]
        if got.get("name") != spec.key:
            raise WeightMismatchError(
                f"manifest tensor {i} is {got.get('name')!r}, config demands "
                f"{spec.key!r}"
            )
        if tuple(got.get("shape", ())) != spec.shape:
            raise WeightMismatchError(
                f"tensor {spec.key} has manifest shape {got.get('shape')}, "
                f"config demands {list(spec.shape)}"
            )
    if len(entries) > len(specs):
        raise WeightMismatchError(
            f"manifest lists extra tensor {entries[len(specs)].get('name')!r}"
        )

    payload = body[header + manifest_len :]
    total = sum(int(np.prod(s.shape)) for s in specs)
    if len(payload) != 4 * total:
        raise WeightCorruptionError(
            f"payload is {len(payload)} bytes, manifest demands {4 * total}"
        )
    weights: dict = {}
    offset = 0
    for spec in specs:
        n = int(np.prod(spec.shape))
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=offset)
        weights.setdefault(spec.block, {})[spec.name] = (
            arr.reshape(spec.shape).copy()
        )
        offset += 4 * n
    return weights, cfg
