import json

import numpy as np
import pytest

from lidarsr import cli, geometry, model

from conftest import FIXTURES, fan_points


def write_scan(path, points):
    records = np.zeros((len(points), 4), dtype="<f4")
    records[:, :3] = points
    path.write_bytes(records.tobytes())


@pytest.fixture
def calib_file(tmp_path, calib8):
    path = tmp_path / "calib8.json"
    geometry.save_calibration(calib8, path)
    return path


@pytest.fixture
def scan_file(tmp_path, calib8, rng):
    path = tmp_path / "scan.bin"
    write_scan(path, fan_points(calib8, 300, rng))
    return path


TINY = ["--depths", "1,1", "--dim", "4", "--state", "2", "--scales", "2x1"]


class TestProject:
    def test_two_point_scan_gives_two_valid_pixels(self, tmp_path, calib_file, calib8):
        scan = tmp_path / "two.bin"
        write_scan(scan, np.array([[10.0, 0.0, -0.5], [0.0, 12.0, -1.0]]))
        out = tmp_path / "out.rimg"
        code = cli.main(
            ["project", str(scan), str(out), "--calib", str(calib_file)]
        )
        assert code == 0
        img = geometry.load_rimg(out, calib8)
        assert img.valid_count() == 2

    def test_missing_calibration_exits_3(self, tmp_path, scan_file):
        code = cli.main(
            [
                "project", str(scan_file), str(tmp_path / "o.rimg"),
                "--calib", str(tmp_path / "missing.json"),
            ]
        )
        assert code == 3

    def test_missing_scan_exits_2(self, tmp_path, calib_file):
        code = cli.main(
            [
                "project", str(tmp_path / "missing.bin"), str(tmp_path / "o.rimg"),
                "--calib", str(calib_file),
            ]
        )
        assert code == 2

    def test_failed_run_leaves_no_output(self, tmp_path, calib_file):
        out = tmp_path / "o.rimg"
        cli.main(
            ["project", str(tmp_path / "missing.bin"), str(out),
             "--calib", str(calib_file)]
        )
        assert not out.exists()

    def test_golden_fixture_reproduced(self, tmp_path):
        out = tmp_path / "got.rimg"
        code = cli.main(
            [
                "project",
                str(FIXTURES / "scan500.bin"),
                str(out),
                "--calib", str(FIXTURES / "calib16.json"),
            ]
        )
        assert code == 0
        assert out.read_bytes() == (FIXTURES / "scan500.rimg").read_bytes()

    def test_runs_are_byte_stable(self, tmp_path, calib_file, scan_file):
        a, b = tmp_path / "a.rimg", tmp_path / "b.rimg"
        for out in (a, b):
            assert cli.main(
                ["project", str(scan_file), str(out), "--calib", str(calib_file)]
            ) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_png_preview_written(self, tmp_path, calib_file, scan_file):
        out = tmp_path / "o.rimg"
        png = tmp_path / "o.png"
        code = cli.main(
            [
                "project", str(scan_file), str(out),
                "--calib", str(calib_file), "--png", str(png),
            ]
        )
        assert code == 0
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestPipeline:
    def test_writes_bounded_ply(self, tmp_path, calib_file, scan_file):
        out = tmp_path / "dense.ply"
        code = cli.main(
            ["pipeline", str(scan_file), str(out), "--calib", str(calib_file)]
            + TINY
        )
        assert code == 0
        text = out.read_text()
        n = int(
            next(l for l in text.splitlines() if l.startswith("element vertex")).split()[-1]
        )
        assert 0 < n <= 16 * 64

    def test_same_seed_is_byte_stable(self, tmp_path, calib_file, scan_file):
        outs = []
        for name in ("a.ply", "b.ply"):
            out = tmp_path / name
            assert cli.main(
                ["pipeline", str(scan_file), str(out), "--calib", str(calib_file),
                 "--seed", "7"] + TINY
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_gt_metrics_to_stdout(self, tmp_path, calib_file, scan_file, capsys):
        out = tmp_path / "dense.ply"
        code = cli.main(
            ["pipeline", str(scan_file), str(out), "--calib", str(calib_file),
             "--gt", str(scan_file)] + TINY
        )
        assert code == 0
        report = json.loads(capsys.readouterr().out)
        assert np.isfinite(report["cd"])
        assert 0.0 <= report["iou"] <= 1.0
        assert np.isfinite(report["mae"])
        assert len(report["bands"]) == 5

    def test_json_out_writes_file(self, tmp_path, calib_file, scan_file, capsys):
        out = tmp_path / "dense.ply"
        jpath = tmp_path / "metrics.json"
        code = cli.main(
            ["pipeline", str(scan_file), str(out), "--calib", str(calib_file),
             "--gt", str(scan_file), "--json-out", str(jpath)] + TINY
        )
        assert code == 0
        assert capsys.readouterr().out == ""
        report = json.loads(jpath.read_text())
        assert "cd" in report and "bands" in report

    def test_json_out_without_gt_exits_3(self, tmp_path, calib_file, scan_file):
        code = cli.main(
            ["pipeline", str(scan_file), str(tmp_path / "o.ply"),
             "--calib", str(calib_file), "--json-out", str(tmp_path / "m.json")]
            + TINY
        )
        assert code == 3

    def test_weight_dims_mismatch_exits_5(self, tmp_path, calib_file, scan_file):
        cfg = model.NetworkConfig(
            depths=(1, 1), base_dim=4, patch=(1, 4), upscale=(2, 1),
            ssm_state=2, input_dims=(8, 32),  # projector will produce (8, 64)
        )
        wpath = tmp_path / "w.lsrw"
        model.save_weights(model.build(cfg, seed=0), cfg, wpath)
        code = cli.main(
            ["pipeline", str(scan_file), str(tmp_path / "o.ply"),
             "--calib", str(calib_file), "--weights", str(wpath)]
        )
        assert code == 5

    def test_weights_flag_conflicts_with_arch_flags(self, tmp_path, calib_file, scan_file):
        code = cli.main(
            ["pipeline", str(scan_file), str(tmp_path / "o.ply"),
             "--calib", str(calib_file), "--weights", str(tmp_path / "w.lsrw"),
             "--dim", "4"]
        )
        assert code == 3

    def test_saved_weights_run_end_to_end(self, tmp_path, calib_file, scan_file):
        cfg = model.NetworkConfig(
            depths=(1, 1), base_dim=4, patch=(1, 4), upscale=(2, 1),
            ssm_state=2, input_dims=(8, 64),
        )
        wpath = tmp_path / "w.lsrw"
        model.save_weights(model.build(cfg, seed=3), cfg, wpath)
        out_w = tmp_path / "from_weights.ply"
        assert cli.main(
            ["pipeline", str(scan_file), str(out_w), "--calib", str(calib_file),
             "--weights", str(wpath)]
        ) == 0
        # same architecture and seed via flags must give identical output
        out_f = tmp_path / "from_flags.ply"
        assert cli.main(
            ["pipeline", str(scan_file), str(out_f), "--calib", str(calib_file),
             "--seed", "3", "--depths", "1,1", "--dim", "4", "--state", "2",
             "--scales", "2x1"]
        ) == 0
        assert out_w.read_bytes() == out_f.read_bytes()

    def test_corrupt_weight_file_exits_5(self, tmp_path, calib_file, scan_file):
        cfg = model.NetworkConfig(
            depths=(1, 1), base_dim=4, patch=(1, 4), upscale=(2, 1),
            ssm_state=2, input_dims=(8, 64),
        )
        wpath = tmp_path / "w.lsrw"
        model.save_weights(model.build(cfg, seed=0), cfg, wpath)
        blob = bytearray(wpath.read_bytes())
        blob[len(blob) // 2] ^= 0xFF
        wpath.write_bytes(bytes(blob))
        code = cli.main(
            ["pipeline", str(scan_file), str(tmp_path / "o.ply"),
             "--calib", str(calib_file), "--weights", str(wpath)]
        )
        assert code == 5

    def test_window_none_skips_compensation(self, tmp_path, calib_file, scan_file, capsys):
        out = tmp_path / "o.ply"
        code = cli.main(
            ["pipeline", str(scan_file), str(out), "--calib", str(calib_file),
             "--window", "none"] + TINY
        )
        assert code == 0
        assert "hole compensation" not in capsys.readouterr().err

    def test_bad_scales_format_exits_3(self, tmp_path, calib_file, scan_file):
        code = cli.main(
            ["pipeline", str(scan_file), str(tmp_path / "o.ply"),
             "--calib", str(calib_file), "--scales", "4by1"]
        )
        assert code == 3

    def test_negative_seed_exits_3(self, tmp_path, calib_file, scan_file):
        code = cli.main(
            ["pipeline", str(scan_file), str(tmp_path / "o.ply"),
             "--calib", str(calib_file), "--seed", "-1"] + TINY
        )
        assert code == 3

    def test_png_written(self, tmp_path, calib_file, scan_file):
        out = tmp_path / "o.ply"
        png = tmp_path / "sr.png"
        code = cli.main(
            ["pipeline", str(scan_file), str(out), "--calib", str(calib_file),
             "--png", str(png)] + TINY
        )
        assert code == 0
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestSelfcheck:
    def test_all_oracles_pass(self, capsys):
        code = cli.main(["selfcheck"])
        out = capsys.readouterr().out
        assert code == 0
        lines = [l for l in out.splitlines() if "PASS" in l or "FAIL" in l]
        assert len(lines) == 5
        assert all("PASS" in l for l in lines)
