"""Release gate: the eleven behavioral criteria the package must meet.

Each test prints one pass/fail line (run with -s to see them all) and
asserts the stated tolerance.  Tolerances are contractual; do not loosen
them to make a regression green.
"""

import itertools
import time

import numpy as np
import pytest

from lidarsr import blocks, geometry, metrics, model, selfcheck, ssm


def _report(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"criterion {num:02d} {name:<26} {status}  {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def test_criterion_01_zoh_matches_ode_integration():
    rng = np.random.default_rng(101)
    n = 1000
    a = -rng.uniform(0.01, 5.0, n)
    delta = rng.uniform(0.001, 1.0, n)
    b = rng.uniform(-2.0, 2.0, n)
    h0 = rng.uniform(-1.0, 1.0, n)

    start = time.perf_counter()
    a_bar, b_bar = ssm.zoh_ab(a[:, None], b[:, None], delta)
    discrete = a_bar[:, 0] * h0 + b_bar[:, 0]
    reference = selfcheck.ode_step_reference(a, b, delta, h0)
    elapsed = time.perf_counter() - start

    rel = np.abs(discrete - reference) / np.maximum(np.abs(reference), 1e-15)
    ok = rel.max() <= 1e-6 and elapsed < 5.0
    _report(1, "zoh-vs-ode", ok, f"max rel {rel.max():.3e}, {elapsed:.2f}s")


def test_criterion_02_lti_scan_equals_convolution():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(200):
        D = int(rng.integers(1, 5))
        N = int(rng.integers(1, 9))
        L = int(rng.integers(1, 65))
        params = ssm.SsmParams(
            a=-rng.uniform(0.01, 5.0, (D, N)),
            b=rng.uniform(-2.0, 2.0, (D, N)),
            c=rng.uniform(-2.0, 2.0, (D, N)),
            d=rng.uniform(-1.0, 1.0, D),
            delta=rng.uniform(0.001, 1.0, D),
        )
        dssm = ssm.zoh_discretize(params)
        x = rng.normal(size=(D, L))
        got = ssm.scan_1d(dssm, x)
        ref = selfcheck.lti_kernel_reference(dssm, x)
        worst = max(worst, float(np.abs(got - ref).max()))
    _report(2, "lti-scan-vs-conv", worst <= 1e-5, f"max abs {worst:.3e} over 200 sets")


def test_criterion_03_ss2d_traversals_enumerated():
    def slow_orders(h, w):
        row_fwd = [i * w + j for i in range(h) for j in range(w)]
        col_fwd = [i * w + j for j in range(w) for i in range(h)]
        return {
            ssm.ScanDirection.ROW_MAJOR_FORWARD: row_fwd,
            ssm.ScanDirection.ROW_MAJOR_REVERSE: row_fwd[::-1],
            ssm.ScanDirection.COL_MAJOR_FORWARD: col_fwd,
            ssm.ScanDirection.COL_MAJOR_REVERSE: col_fwd[::-1],
        }

    rng = np.random.default_rng(103)
    ok = True
    checked = 0
    for h, w in itertools.product(range(1, 6), range(1, 8)):
        expected = slow_orders(h, w)
        for direction in ssm.ScanDirection:
            idx = ssm.traversal_indices(direction, h, w)
            if idx.tolist() != expected[direction]:
                ok = False
            flat = rng.normal(size=h * w)
            refolded = np.empty_like(flat)
            refolded[idx] = flat[idx]
            if not np.array_equal(refolded, flat):
                ok = False
            checked += 1
    _report(3, "ss2d-traversals", ok, f"{checked} grid/direction combos")


def test_criterion_04_projection_round_trip():
    calib = geometry.default_calibration()
    rng = np.random.default_rng(104)
    pts = selfcheck.sample_fan_points(calib, 500, rng)
    img = geometry.project(pts, calib)
    back = geometry.back_project(img)
    assert len(back) == len(pts)

    # match recovered points to sources through their shared pixel
    rows = geometry.brute_force_rows(pts, calib)
    yaw = np.arctan2(pts[:, 1], pts[:, 0])
    cols = np.clip(
        np.floor((1 - (yaw + np.pi) / (2 * np.pi)) * calib.width),
        0, calib.width - 1,
    ).astype(int)
    by_pixel = {rc: i for i, rc in enumerate(zip(rows, cols))}
    out_rows, out_cols = np.nonzero(np.isfinite(img.values))
    src = pts[[by_pixel[rc] for rc in zip(out_rows, out_cols)]]

    r_err = np.abs(np.linalg.norm(back, axis=1) - np.linalg.norm(src, axis=1))
    dyaw = np.arctan2(back[:, 1], back[:, 0]) - np.arctan2(src[:, 1], src[:, 0])
    yaw_err = np.abs(np.arctan2(np.sin(dyaw), np.cos(dyaw)))
    pitch = lambda p: np.arctan2(-p[:, 2], np.hypot(p[:, 0], p[:, 1]))
    pitch_err = np.abs(pitch(back) - pitch(src))
    gap = np.abs(np.diff(calib.phi)).max()

    ok = (
        r_err.max() <= 1e-5
        and yaw_err.max() <= np.pi / calib.width
        and pitch_err.max() <= gap
    )
    _report(
        4, "projection-round-trip", ok,
        f"range {r_err.max():.2e} m, yaw {yaw_err.max():.2e} rad, "
        f"pitch {pitch_err.max():.2e} rad over 500 points",
    )


def test_criterion_05_hole_compensation_contract():
    rng = np.random.default_rng(105)
    calib = geometry.BeamCalibration(
        phi=np.linspace(0.05, -0.4, 32), delta=np.zeros(32), r_max=80.0, width=256
    )
    values = rng.uniform(1.0, 79.0, (32, 256))
    values[rng.random((32, 256)) < 0.3] = np.nan
    img = geometry.RangeImage(values=values, calibration=calib)
    out = geometry.hole_compensate(img, "3x1")

    valid = np.isfinite(values)
    bit_unchanged = np.array_equal(out.values[valid], values[valid])
    decreased = out.hole_mask().sum() < img.hole_mask().sum()

    fillable_filled = True
    hand_checked = 0
    hand_ok = True
    hole_rows, hole_cols = np.nonzero(~valid)
    order = rng.permutation(len(hole_rows))
    for k in order:
        i, j = int(hole_rows[k]), int(hole_cols[k])
        neighbors = [
            values[i + di, j]
            for di in (-1, 1)
            if 0 <= i + di < 32 and np.isfinite(values[i + di, j])
        ]
        if not neighbors:
            continue
        if not np.isfinite(out.values[i, j]):
            fillable_filled = False
        if hand_checked < 10:
            expect = sum(neighbors) / len(neighbors)
            if out.values[i, j] != expect:
                hand_ok = False
            hand_checked += 1

    ok = bit_unchanged and decreased and fillable_filled and hand_ok
    _report(
        5, "hole-compensation", ok,
        f"{img.hole_mask().sum()} -> {out.hole_mask().sum()} holes, "
        f"{hand_checked} hand-checked fills",
    )


def test_criterion_06_end_to_end_forward_shape():
    rng = np.random.default_rng(106)
    calib = geometry.BeamCalibration(
        phi=np.deg2rad(np.linspace(2.0, -24.8, 16)),
        delta=np.zeros(16),
        r_max=80.0,
        width=1024,
    )
    values = rng.uniform(1.0, 79.0, (16, 1024))
    values[rng.random((16, 1024)) < 0.2] = np.nan
    img = geometry.RangeImage(values=values, calibration=calib)

    cfg = model.NetworkConfig(
        depths=(2, 2, 2, 2), base_dim=16, patch=(1, 4), upscale=(4, 1),
        ssm_state=8, input_dims=(16, 1024),
    )
    weights = model.build(cfg, seed=0)

    start = time.perf_counter()
    out1 = model.forward(img, weights, cfg)
    out2 = model.forward(img, weights, cfg)
    elapsed = time.perf_counter() - start

    ok = (
        out1.values.shape == (64, 1024)
        and np.isfinite(out1.values).all()
        and (out1.values > 0).all()
        and (out1.values <= calib.r_max).all()
        and np.array_equal(out1.values, out2.values)
        and elapsed < 60.0
    )
    _report(
        6, "end-to-end-forward", ok,
        f"(16,1024) -> {out1.values.shape}, two runs in {elapsed:.1f}s",
    )


def test_criterion_07_metric_identities_and_oracles():
    rng = np.random.default_rng(107)
    cloud = rng.uniform(-20, 20, (120, 3))
    calib = geometry.BeamCalibration(
        phi=np.linspace(0.05, -0.4, 8), delta=np.zeros(8), r_max=80.0, width=64
    )
    values = rng.uniform(1.0, 79.0, (8, 64))
    img = geometry.RangeImage(values=values, calibration=calib)

    identities = (
        metrics.chamfer(cloud, cloud) == 0.0
        and metrics.voxel_iou(cloud, cloud) == 1.0
        and metrics.range_mae(img, img) == 0.0
    )

    worst = 0.0
    for _ in range(100):
        pred = rng.uniform(-10, 10, (200, 3))
        gt = rng.uniform(-10, 10, (200, 3))
        diff = abs(metrics.chamfer(pred, gt) - metrics.chamfer_bruteforce(pred, gt))
        worst = max(worst, diff)

    hand = metrics.chamfer(
        np.array([[0.0, 0.0, 0.0]]),
        np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]),
    )

    ok = identities and worst <= 1e-9 and abs(hand - 3.5) < 1e-12
    _report(
        7, "metric-identities", ok,
        f"kd-vs-brute {worst:.2e} over 100 pairs, hand case {hand}",
    )


def test_criterion_08_selective_scan_degenerates_to_lti():
    rng = np.random.default_rng(108)
    worst = 0.0
    for _ in range(50):
        D = int(rng.integers(1, 5))
        N = int(rng.integers(1, 7))
        L = int(rng.integers(1, 50))
        a = -rng.uniform(0.1, 4.0, (D, N))
        b = rng.normal(size=N)
        c = rng.normal(size=N)
        d = rng.normal(size=D)
        delta = rng.uniform(0.01, 0.5, D)
        x = rng.normal(size=(D, L))

        proj = ssm.SelectiveProjections.constant(a, b, c, d, delta)
        y_sel = ssm.selective_scan_1d(x, proj)

        params = ssm.SsmParams(
            a=a,
            b=np.broadcast_to(b, (D, N)).copy(),
            c=np.broadcast_to(c, (D, N)).copy(),
            d=d,
            delta=delta,
        )
        y_lti = ssm.scan_1d(ssm.euler_discretize(params), x)
        worst = max(worst, float(np.abs(y_sel - y_lti).max()))
    _report(8, "selective-to-lti", worst <= 1e-6, f"max abs {worst:.3e} over 50 inputs")


def test_criterion_09_weight_round_trip_and_corruption(tmp_path):
    rng = np.random.default_rng(109)
    configs = []
    for depths in [(1, 1), (2, 1), (1, 2), (2, 2)]:
        for base_dim in (4, 8):
            configs.append(
                model.NetworkConfig(
                    depths=depths, base_dim=base_dim, patch=(1, 4),
                    upscale=(2, 1), ssm_state=int(rng.integers(2, 5)),
                    input_dims=(8, 32),
                )
            )
    for depths in [(1, 1, 1), (2, 1, 1)]:
        for base_dim in (4, 6):
            configs.append(
                model.NetworkConfig(
                    depths=depths, base_dim=base_dim, patch=(1, 4),
                    upscale=(4, 1), ssm_state=2, input_dims=(8, 64),
                )
            )
    # 12 distinct architectures, cycled to 20 runs with fresh seeds
    configs = list(itertools.islice(itertools.cycle(configs), 20))

    identical = True
    detected = 0
    trials = 0
    for i, cfg in enumerate(configs):
        weights = model.build(cfg, seed=i)
        path = tmp_path / f"w{i}.lsrw"
        model.save_weights(weights, cfg, path)
        loaded, loaded_cfg = model.load_weights(path)
        if loaded_cfg != cfg:
            identical = False
        for block_path, tensors in weights.items():
            for name, arr in tensors.items():
                if not (
                    np.array_equal(loaded[block_path][name], arr)
                    and loaded[block_path][name].dtype == arr.dtype
                ):
                    identical = False

        blob = bytearray(path.read_bytes())
        pos = int(rng.integers(0, len(blob)))
        blob[pos] ^= 1 + int(rng.integers(0, 255))
        bad = tmp_path / f"bad{i}.lsrw"
        bad.write_bytes(bytes(blob))
        trials += 1
        try:
            model.load_weights(bad)
        except Exception:
            detected += 1

    ok = identical and detected == trials
    _report(
        9, "weight-round-trip", ok,
        f"20 configs bit-identical, {detected}/{trials} corruptions caught",
    )


def test_criterion_10_vss_residual_identity():
    rng = np.random.default_rng(110)
    ok = True
    for i in range(20):
        dim = int(rng.choice([4, 6, 8]))
        n_state = int(rng.integers(2, 5))
        h = int(rng.integers(2, 7))
        w = int(rng.integers(2, 11))
        branches = tuple(
            ssm.SelectiveProjections(
                a=-np.broadcast_to(
                    np.arange(1.0, n_state + 1.0), (dim, n_state)
                ).copy(),
                d=np.zeros(dim),
                w_b=np.zeros((n_state, dim)),
                b_b=np.zeros(n_state),
                w_c=np.zeros((n_state, dim)),
                b_c=np.zeros(n_state),
                w_delta=np.zeros((dim, dim)),
                b_delta=np.full(dim, ssm.inverse_softplus(np.array(0.05))),
            )
            for _ in range(4)
        )
        hidden = dim * blocks.FFN_EXPANSION
        weights = blocks.VssWeights(
            norm1_scale=np.ones(dim),
            norm1_offset=np.zeros(dim),
            branches=branches,
            norm2_scale=np.ones(dim),
            norm2_offset=np.zeros(dim),
            ffn=blocks.FfnWeights(
                w_in=rng.normal(size=(hidden, dim)),
                b_in=rng.normal(size=hidden),
                w_dw=rng.normal(size=(hidden, 3, 3)),
                b_dw=rng.normal(size=hidden),
                w_out=np.zeros((dim, hidden)),
                b_out=np.zeros(dim),
            ),
        )
        x = rng.normal(size=(dim, h, w))
        if not np.array_equal(blocks.vss_block(x, weights), x):
            ok = False
    _report(10, "vss-residual-identity", ok, "20 zeroed-branch inputs, exact")


def test_criterion_11_parameter_count_ordering():
    depth_sets = [(2, 2, 2, 2), (2, 2, 9, 2), (2, 2, 12, 2), (2, 2, 27, 2)]
    counts = []
    for depths in depth_sets:
        cfg = model.NetworkConfig(depths=depths)
        counts.append(model.param_count(model.build(cfg, seed=0)))
    ok = counts[0] < counts[1] < counts[2] < counts[3]
    _report(
        11, "param-count-ordering", ok,
        " < ".join(str(c) for c in counts),
    )
