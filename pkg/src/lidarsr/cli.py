"""Command-line surface.

Three subcommands:

  project    point cloud file -> binary range image (+ optional PNG)
  pipeline   point cloud -> range image -> hole fill -> network ->
             dense point cloud (PLY), with optional metrics vs a
             ground-truth scan
  selfcheck  run the built-in oracle suite and report per-check timing

Status messages go to standard error; machine-readable output (the
metrics JSON when no --json-out file is given) goes to standard out.
Exit codes: 0 success, 1 selfcheck failure, 2 parse/input error,
3 configuration error, 4 numerical error, 5 weight-file problem.
"""

import argparse
import sys
from dataclasses import dataclass

from . import geometry, metrics, model, selfcheck
from ._util import atomic_write_text
from .errors import ConfigError, LidarSrError, SelfcheckError, WeightMismatchError

_DEFAULT_SCALES = (4, 1)
_DEFAULT_DEPTHS = (2, 2, 2, 2)
_DEFAULT_DIM = 16
_DEFAULT_STATE = 8
_PATCH = (1, 4)


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation; construction happens before any file I/O."""

    command: str
    scan: str = ""
    out: str = ""
    calib: str | None = None
    window: str = "3x1"
    weights: str | None = None
    seed: int = 0
    scales: tuple = _DEFAULT_SCALES
    depths: tuple = _DEFAULT_DEPTHS
    dim: int = _DEFAULT_DIM
    state: int = _DEFAULT_STATE
    gt: str | None = None
    png: str | None = None
    json_out: str | None = None
    arch_flags_set: bool = False


def _parse_scales(text: str) -> tuple:
    try:
        sv, sh = text.lower().split("x")
        scales = (int(sv), int(sh))
    except ValueError:
        raise ConfigError(
            f"--scales must look like 4x1, got {text!r}"
        ) from None
    if any(s < 1 for s in scales):
        raise ConfigError(f"--scales factors must be >= 1, got {text!r}")
    return scales


def _parse_depths(text: str) -> tuple:
    try:
        depths = tuple(int(f) for f in text.split(","))
    except ValueError:
        raise ConfigError(
            f"--depths must be comma-separated integers, got {text!r}"
        ) from None
    return depths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lidarsr",
        description="Range-image super-resolution for LiDAR scans.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_proj = sub.add_parser(
        "project", help="project a scan onto a binary range image"
    )
    p_proj.add_argument("scan", help="input scan (.bin kitti records or .txt/.xyz)")
    p_proj.add_argument("out", help="output range image (.rimg)")
    p_proj.add_argument(
        "--calib", default=None,
        help="calibration JSON; built-in 64-beam fan when omitted",
    )
    p_proj.add_argument(
        "--png", default=None, help="also write a 16-bit grayscale preview"
    )

    p_pipe = sub.add_parser(
        "pipeline", help="scan -> super-resolved point cloud (PLY)"
    )
    p_pipe.add_argument("scan", help="input scan (.bin or .txt/.xyz)")
    p_pipe.add_argument("out", help="output point cloud (.ply)")
    p_pipe.add_argument("--calib", default=None)
    p_pipe.add_argument(
        "--window", default="3x1", choices=["3x1", "1x3", "none"],
        help="hole-fill window; 'none' skips compensation",
    )
    p_pipe.add_argument(
        "--weights", default=None,
        help="weight file; omitted = random weights from --seed",
    )
    p_pipe.add_argument("--seed", type=int, default=0)
    p_pipe.add_argument(
        "--scales", default=None, metavar="SVxSH",
        help="upscale factors, default 4x1 (incompatible with --weights)",
    )
    p_pipe.add_argument(
        "--depths", default=None,
        help="VSS blocks per stage, default 2,2,2,2 (incompatible with --weights)",
    )
    p_pipe.add_argument(
        "--dim", type=int, default=None,
        help="base channel width, default 16 (incompatible with --weights)",
    )
    p_pipe.add_argument(
        "--state", type=int, default=None,
        help="scan state dimension, default 8 (incompatible with --weights)",
    )
    p_pipe.add_argument("--gt", default=None, help="ground-truth scan for metrics")
    p_pipe.add_argument(
        "--png", default=None, help="write the super-resolved range image PNG"
    )
    p_pipe.add_argument(
        "--json-out", default=None,
        help="metrics JSON file (default: stdout); requires --gt",
    )

    sub.add_parser("selfcheck", help="run the built-in oracle suite")
    return parser


def run_config_from_args(args: argparse.Namespace) -> RunConfig:
    """Validate flag combinations and defaults; no file access here."""
    if args.command == "selfcheck":
        return RunConfig(command="selfcheck")
    if args.command == "project":
        return RunConfig(
            command="project", scan=args.scan, out=args.out,
            calib=args.calib, png=args.png,
        )
    if args.json_out is not None and args.gt is None:
        raise ConfigError("--json-out requires --gt")
    if args.seed < 0:
        raise ConfigError(f"--seed must be >= 0, got {args.seed}")
    arch_flags = (args.scales, args.depths, args.dim, args.state)
    arch_flags_set = any(f is not None for f in arch_flags)
    if args.weights is not None and arch_flags_set:
        raise ConfigError(
            "--scales/--depths/--dim/--state are incompatible with "
            "--weights; the weight file fixes the architecture"
        )
    scales = (_DEFAULT_SCALES if args.scales is None
              else _parse_scales(args.scales))
    depths = (_DEFAULT_DEPTHS if args.depths is None
              else _parse_depths(args.depths))
    return RunConfig(
        command="pipeline", scan=args.scan, out=args.out, calib=args.calib,
        window=args.window, weights=args.weights, seed=args.seed,
        scales=scales, depths=depths,
        dim=args.dim if args.dim is not None else _DEFAULT_DIM,
        state=args.state if args.state is not None else _DEFAULT_STATE,
        gt=args.gt, png=args.png, json_out=args.json_out,
        arch_flags_set=arch_flags_set,
    )


def _status(message: str) -> None:
    print(message, file=sys.stderr)


def _load_calib(cfg: RunConfig) -> geometry.BeamCalibration:
    if cfg.calib is None:
        return geometry.default_calibration()
    return geometry.load_calibration(cfg.calib)


def _load_cloud(path: str):
    return geometry.load_scan(path, geometry.detect_scan_format(path))


def cmd_project(cfg: RunConfig) -> int:
    calib = _load_calib(cfg)
    cloud = _load_cloud(cfg.scan)
    img = geometry.project(cloud, calib)
    geometry.save_rimg(img, cfg.out)
    if cfg.png:
        geometry.save_range_png(img, cfg.png)
    h, w = img.shape
    _status(
        f"wrote {cfg.out}: {h}x{w}, {img.valid_count()} valid pixels "
        f"from {len(cloud)} points"
    )
    return 0


def cmd_pipeline(cfg: RunConfig) -> int:
    calib = _load_calib(cfg)
    cloud = _load_cloud(cfg.scan)
    img = geometry.project(cloud, calib)
    if cfg.window != "none":
        before = img.valid_count()
        img = geometry.hole_compensate(img, cfg.window)
        _status(
            f"hole compensation ({cfg.window}): {before} -> "
            f"{img.valid_count()} valid pixels"
        )

    if cfg.weights is not None:
        weights, netcfg = model.load_weights(cfg.weights)
        if netcfg.input_dims != img.shape:
            raise WeightMismatchError(
                f"weight file expects input {netcfg.input_dims}, "
                f"projected image is {img.shape}"
            )
        _status(f"loaded weights {cfg.weights} ({model.param_count(weights)} parameters)")
    else:
        netcfg = model.NetworkConfig(
            depths=cfg.depths, base_dim=cfg.dim, patch=_PATCH,
            upscale=cfg.scales, ssm_state=cfg.state, input_dims=img.shape,
        )
        weights = model.build(netcfg, cfg.seed)
        _status(
            f"built random weights (seed {cfg.seed}, "
            f"{model.param_count(weights)} parameters)"
        )

    out_img = model.forward(img, weights, netcfg)
    dense = geometry.back_project(out_img)
    geometry.save_ply(dense, cfg.out)
    if cfg.png:
        geometry.save_range_png(out_img, cfg.png)
    oh, ow = out_img.shape
    _status(f"wrote {cfg.out}: {len(dense)} points from a {oh}x{ow} image")

    if cfg.gt is not None:
        gt_cloud = _load_cloud(cfg.gt)
        gt_img = geometry.project(gt_cloud, out_img.calibration)
        mae = metrics.range_mae(out_img, gt_img)
        report = metrics.banded_report(dense, gt_cloud, mae=mae)
        text = report.to_json() + "\n"
        if cfg.json_out:
            atomic_write_text(cfg.json_out, text)
            _status(f"wrote metrics to {cfg.json_out}")
        else:
            sys.stdout.write(text)
    return 0


def cmd_selfcheck(cfg: RunConfig) -> int:
    results = selfcheck.run_all()
    for res in results:
        verdict = "PASS" if res.passed else "FAIL"
        print(f"{res.name:<22} {verdict}  {res.seconds:7.2f}s  {res.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise SelfcheckError(f"oracle failures: {', '.join(failed)}")
    _status(f"all {len(results)} oracles passed")
    return 0


_COMMANDS = {
    "project": cmd_project,
    "pipeline": cmd_pipeline,
    "selfcheck": cmd_selfcheck,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = run_config_from_args(args)
        return _COMMANDS[cfg.command](cfg)
    except LidarSrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
