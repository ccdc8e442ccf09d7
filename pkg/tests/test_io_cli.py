import json
import math

import numpy as np
import pytest

from aggpatch import exact, io
from aggpatch.cli import main, parse_config
from aggpatch.diagnostics import COLUMNS, cheap_record
from aggpatch.contour import PatchState
from aggpatch.errors import ConfigurationError
from aggpatch.geometry import MarkerCurve
from aggpatch.levelset import DefiningGrid


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return path


def disc_config(tmp_path, **extra):
    cfg = {"initial_shape": {"type": "disc", "r0": 1.0}, "n_markers": 128, "ds": 0.01,
           "s_end": 2.0, "snapshot_every": 50, "diagnostics": "cheap", "output_dir": str(tmp_path / "out")}
    cfg.update(extra)
    return write_json(tmp_path / "config.json", cfg)


class TestSnapshotIO:
    def test_round_trip_is_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        c = MarkerCurve(exact.fourier_boundary(1.0, [(3, 0.1, 0.2)], 64) + 1e-3 * rng.normal(size=(64, 2)))
        io.write_snapshot(tmp_path / "a.txt", c, 0.123456789)
        snap = io.read_snapshot(tmp_path / "a.txt")
        np.testing.assert_array_equal(snap.curve.points, c.points)
        assert snap.s == 0.123456789
        assert snap.t == pytest.approx(-math.expm1(-0.123456789), rel=1e-15)
        assert int(snap.header["n"]) == 64

    def test_missing_header(self, tmp_path):
        (tmp_path / "bad.txt").write_text("0 0\n1 0\n")
        with pytest.raises(ConfigurationError):
            io.read_snapshot(tmp_path / "bad.txt")

    def test_count_mismatch(self, tmp_path):
        io.write_snapshot(tmp_path / "a.txt", MarkerCurve(exact.disc_boundary(exact.DiscSolution(), 0, 16)), 0.0)
        lines = (tmp_path / "a.txt").read_text().splitlines()
        (tmp_path / "a.txt").write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ConfigurationError):
            io.read_snapshot(tmp_path / "a.txt")


def test_grid_round_trip(tmp_path):
    g = DefiningGrid.covering((-1.0, -0.5), (1.0, 0.5), 17, values_fn=lambda p: np.sin(p[..., 0]) * p[..., 1], s=0.7)
    io.write_grid(tmp_path / "g.csv", g)
    back = io.read_grid(tmp_path / "g.csv")
    np.testing.assert_array_equal(back.values, g.values)
    assert (back.origin, back.spacing, back.nx, back.ny, back.s) == (g.origin, g.spacing, g.nx, g.ny, g.s)


def test_diagnostics_writer_round_trip(tmp_path):
    st = PatchState.initial(MarkerCurve(exact.disc_boundary(exact.DiscSolution(), 0, 64)))
    rec = cheap_record(st)
    with io.DiagnosticsWriter(tmp_path / "d.csv") as w:
        w.write(rec)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == ",".join(COLUMNS)
    back = io.read_diagnostics(tmp_path / "d.csv")[0]
    np.testing.assert_array_equal(np.array(back.as_row()), np.array(rec.as_row()))


class TestConfig:
    def test_marker_count_message(self, tmp_path, capsys):
        assert main(["run", str(disc_config(tmp_path, n_markers=4))]) == 1
        assert "n_markers ≥ 8" in capsys.readouterr().err

    @pytest.mark.parametrize("field,value", [("ds", -0.1), ("gamma", 1.5), ("snapshot_every", 0), ("bogus", 1)])
    def test_bad_fields_named(self, field, value):
        raw = {"initial_shape": {"type": "disc"}, "n_markers": 32, "ds": 0.01, "s_end": 1.0, field: value}
        with pytest.raises(ConfigurationError, match=field):
            parse_config(raw)

    def test_unknown_shape(self):
        with pytest.raises(ConfigurationError, match="initial_shape"):
            parse_config({"initial_shape": {"type": "star"}, "n_markers": 32, "ds": 0.01, "s_end": 1.0})

    def test_missing_file(self, tmp_path):
        assert main(["run", str(tmp_path / "absent.json")]) == 1


class TestRun:
    def test_disc_to_s2(self, tmp_path, monkeypatch):
        monkeypatch.chdir(tmp_path)
        assert main(["run", str(disc_config(tmp_path))]) == 0
        out = tmp_path / "out"
        final = io.read_snapshot(out / "final.txt")
        assert final.s == 2.0
        r = np.linalg.norm(final.curve.points, axis=1)
        assert np.abs(r - math.exp(-1.0)).max() <= 1e-4
        status = json.loads((out / "status.json").read_text())
        assert status["exit"] == 0 and not status["blown_up"] and status["steps"] == 200
        assert len(list((out / "snapshots").glob("snap_*.txt"))) == 5

    def test_one_row_per_step(self, tmp_path):
        cfg = disc_config(tmp_path, s_end=0.1, snapshot_every=1, n_markers=32)
        assert main(["run", str(cfg)]) == 0
        rows = io.read_diagnostics(tmp_path / "out" / "diagnostics.csv")
        assert len(rows) == 11
        assert np.all(np.diff([r.s for r in rows]) > 0)

    def test_polygon_file_grid_and_svg(self, tmp_path):
        pts = exact.ellipse_boundary(exact.EllipseSolution(1.5, 1.0), 48)
        np.savetxt(tmp_path / "poly.txt", pts)
        cfg = write_json(tmp_path / "c.json", {
            "initial_shape": {"type": "polygon_file", "path": "poly.txt"}, "n_markers": 64, "ds": 0.02,
            "s_end": 0.04, "grid": {"n": 32}, "svg": True, "output_dir": str(tmp_path / "o")})
        assert main(["run", str(cfg)]) == 0
        assert len(list((tmp_path / "o" / "grids").glob("*.csv"))) == 3
        assert len(list((tmp_path / "o" / "frames").glob("*.svg"))) == 3
        rows = io.read_diagnostics(tmp_path / "o" / "diagnostics.csv")
        assert all(math.isfinite(r.q) for r in rows)

    def test_blow_up_exit_code(self, tmp_path):
        cfg = write_json(tmp_path / "c.json", {
            "initial_shape": {"type": "fourier_circle", "modes": [[5, 0.6, 0.0]]}, "n_markers": 64,
            "ds": 0.01, "s_end": 8.0, "snapshot_every": 100, "diagnostics": "cheap",
            "output_dir": str(tmp_path / "o")})
        assert main(["run", str(cfg)]) == 2
        status = json.loads((tmp_path / "o" / "status.json").read_text())
        assert status["blown_up"] and status["s"] < 8.0


class TestCompareAndExact:
    def test_exact_matches_itself(self, tmp_path, capsys):
        spec = write_json(tmp_path / "e.json", {"solution": "disc", "r0": 1.0, "s": 0.0, "n": 64, "tolerance": 1e-10})
        assert main(["exact", str(spec), "-o", str(tmp_path / "snap.txt")]) == 0
        assert main(["compare", str(tmp_path / "snap.txt"), str(spec)]) == 0
        report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert report["max"] <= 1e-10 and report["pass"]

    def test_mismatched_time(self, tmp_path):
        spec = write_json(tmp_path / "e.json", {"solution": "disc", "s": 0.0, "n": 64})
        main(["exact", str(spec), "-o", str(tmp_path / "snap.txt")])
        other = write_json(tmp_path / "f.json", {"solution": "disc", "s": 1.0})
        assert main(["compare", str(tmp_path / "snap.txt"), str(other)]) == 1

    def test_ellipse_exact_and_compare(self, tmp_path, capsys):
        spec = write_json(tmp_path / "e.json", {"solution": "ellipse", "a": 2.0, "b": 1.0, "s": 0.5, "n": 128,
                                                 "tolerance": 1e-10})
        assert main(["exact", str(spec), "-o", str(tmp_path / "snap.txt")]) == 0
        assert main(["compare", str(tmp_path / "snap.txt"), str(spec)]) == 0
        report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
        assert report["a"] - report["b"] == pytest.approx(1.0, abs=1e-9)

    def test_exact_to_stdout(self, tmp_path, capsys):
        spec = write_json(tmp_path / "e.json", {"solution": "disc", "r0": 2.0, "s": math.log(4.0), "n": 16})
        assert main(["exact", str(spec)]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].startswith("# s=") and len(lines) == 17
        assert np.hypot(*map(float, lines[1].split())) == pytest.approx(1.0, rel=1e-14)


class TestDiag:
    def _diag_row(self, capsys, argv):
        assert main(argv) == 0
        head, row = capsys.readouterr().out.strip().splitlines()[-2:]
        return dict(zip(head.split(","), map(float, row.split(","))))

    def test_disc_initial(self, tmp_path, capsys):
        spec = write_json(tmp_path / "e.json", {"solution": "disc", "center": [0.5, -0.25], "s": 0.0, "n": 256})
        main(["exact", str(spec), "-o", str(tmp_path / "snap.txt")])
        capsys.readouterr()
        row = self._diag_row(capsys, ["diag", str(tmp_path / "snap.txt")])
        assert row["sup_gradv"] == pytest.approx(0.5, abs=1e-3)
        assert (row["cx"], row["cy"]) == pytest.approx((0.5, -0.25), abs=1e-10)
        assert math.isnan(row["q"]) and math.isnan(row["area_ratio_error"])

    def test_area_after_run(self, tmp_path, capsys):
        main(["run", str(disc_config(tmp_path, s_end=1.0))])
        out = tmp_path / "out"
        capsys.readouterr()
        row = self._diag_row(capsys, ["diag", str(out / "final.txt"), "--initial", str(out / "snapshots" / "snap_000000.txt")])
        assert row["area"] == pytest.approx(math.pi * math.exp(-1.0), abs=1e-4)
        assert row["area_ratio_error"] <= 1e-4
        assert row["mu"] == pytest.approx(math.exp(0.5), rel=1e-3)

    def test_with_grid(self, tmp_path, capsys):
        main(["run", str(disc_config(tmp_path, s_end=0.02, ds=0.01, grid={"n": 48}))])
        out = tmp_path / "out"
        capsys.readouterr()
        row = self._diag_row(capsys, ["diag", str(out / "final.txt"), str(out / "grids" / "grid_000002.csv")])
        assert math.isfinite(row["q"]) and row["q"] > 0
