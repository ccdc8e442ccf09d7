"""Command-line front end: ``run``, ``compare``, ``diag`` and ``exact``.

Exit status: 0 success, 1 configuration or user error, 2 blow-up stop,
3 numerical failure.

Run configuration (JSON)::

    {
      "initial_shape": {"type": "fourier_circle", "r0": 1.0,
                        "modes": [[3, 0.1, 0.0], [4, 0.1, 0.0]], "center": [0, 0]},
      "n_markers": 256, "ds": 0.001, "s_end": 1.0,
      "redistribute_every": 0, "snapshot_every": 100, "gamma": 0.5,
      "output_dir": "out", "grid": {"n": 96, "margin": 0.25},
      "seed": 0, "svg": false, "diagnostics": "full", "c_cal": 1.0
    }

Other shapes: ``{"type": "disc", "r0", "center"}``, ``{"type": "ellipse",
"a", "b", "center"}`` and ``{"type": "polygon_file", "path"}`` (a snapshot
file or a plain two-column text file).

Exact specification (JSON) for ``compare`` and ``exact``::

    {"solution": "disc", "r0": 1.0, "center": [0, 0], "s": 1.0,
     "n": 256, "tolerance": 1e-4}

with ``"solution": "ellipse"`` taking ``a``, ``b`` instead of ``r0``.

Output layout of ``run``: ``diagnostics.csv``, ``snapshots/snap_<step>.txt``,
``final.txt``, ``status.json``, plus ``grids/grid_<step>.csv`` when a grid is
configured and ``frames/frame_<k>.svg`` when ``svg`` is true. A snapshot is a
header line ``# s=.. t=.. area=.. cx=.. cy=.. n=..`` followed by ``x y`` rows
with 17 significant digits. A grid file is one JSON line
``{"origin": [x0, y0], "spacing": h, "nx": .., "ny": .., "s": ..}`` followed by
``ny`` comma-separated rows of ``nx`` node values (row ``j`` is ``y0 + j h``).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import exact, io
from .contour import PatchState, StepperConfig, rk4_step
from .diagnostics import COLUMNS, cheap_record, full_record
from .errors import ConfigurationError, NumericalError, PatchError, TopologyError
from .geometry import MarkerCurve, resample, smooth_moments
from .levelset import signed_distance_grid

log = logging.getLogger("aggpatch")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_NUMERICAL = 0, 1, 2, 3

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}


# --- configuration ------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    n: int = 96
    margin: float = 0.25


@dataclass(frozen=True)
class RunConfig:
    initial_shape: dict
    n_markers: int
    ds: float
    s_end: float
    redistribute_every: int = 0
    snapshot_every: int = 1
    gamma: float = 0.5
    output_dir: str = "output"
    grid: Optional[GridSpec] = None
    seed: int = 0
    svg: bool = False
    diagnostics: str = "full"
    c_cal: float = 1.0
    base: Path = field(default=Path("."), compare=False)


def _number(raw: dict, key: str, kind=float, default=None):
    if key not in raw:
        if default is None:
            raise ConfigurationError(f"{key}: required field missing")
        return default
    val = raw[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigurationError(f"{key}: expected a number, got {val!r}")
    if kind is int and float(val) != int(val):
        raise ConfigurationError(f"{key}: expected an integer, got {val!r}")
    val = kind(val)
    if not math.isfinite(val):
        raise ConfigurationError(f"{key}: must be finite")
    return val


def parse_config(raw: dict, base: Path = Path(".")) -> RunConfig:
    """Validate a decoded JSON config; errors name the offending field."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config: top level must be a JSON object")
    known = {f for f in RunConfig.__dataclass_fields__ if f != "base"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigurationError(f"{sorted(unknown)[0]}: unknown field")
    shape = raw.get("initial_shape")
    if not isinstance(shape, dict) or "type" not in shape:
        raise ConfigurationError("initial_shape: expected an object with a 'type'")
    if shape["type"] not in ("disc", "ellipse", "fourier_circle", "polygon_file"):
        raise ConfigurationError(f"initial_shape.type: unknown shape {shape['type']!r}")

    n_markers = _number(raw, "n_markers", int)
    if n_markers < 8:
        raise ConfigurationError("n_markers ≥ 8")
    ds = _number(raw, "ds")
    if not ds > 0:
        raise ConfigurationError("ds: must be > 0")
    if ds > 0.1:
        raise ConfigurationError("ds: must be <= 0.1")
    gamma = _number(raw, "gamma", float, 0.5)
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma: must lie in (0, 1)")
    redistribute_every = _number(raw, "redistribute_every", int, 0)
    if redistribute_every < 0:
        raise ConfigurationError("redistribute_every: must be >= 0")
    snapshot_every = _number(raw, "snapshot_every", int, 1)
    if snapshot_every < 1:
        raise ConfigurationError("snapshot_every: must be >= 1")
    c_cal = _number(raw, "c_cal", float, 1.0)
    if not c_cal > 0:
        raise ConfigurationError("c_cal: must be > 0")
    diagnostics = raw.get("diagnostics", "full")
    if diagnostics not in ("full", "cheap"):
        raise ConfigurationError("diagnostics: must be 'full' or 'cheap'")
    output_dir = raw.get("output_dir", "output")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigurationError("output_dir: expected a path string")
    grid = raw.get("grid")
    if grid is not None:
        if not isinstance(grid, dict):
            raise ConfigurationError("grid: expected an object")
        n = _number(grid, "n", int, 96)
        if n < 16:
            raise ConfigurationError("grid.n: must be >= 16")
        grid = GridSpec(n=n, margin=_number(grid, "margin", float, 0.25))
    svg = raw.get("svg", False)
    if not isinstance(svg, bool):
        raise ConfigurationError("svg: expected true or false")
    return RunConfig(
        initial_shape=shape, n_markers=n_markers, ds=ds, s_end=_number(raw, "s_end"),
        redistribute_every=redistribute_every, snapshot_every=snapshot_every, gamma=gamma,
        output_dir=output_dir, grid=grid, seed=_number(raw, "seed", int, 0), svg=svg,
        diagnostics=diagnostics, c_cal=c_cal, base=base,
    )


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"config: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config: invalid JSON ({exc})") from exc
    return parse_config(raw, base=path.parent)


def _center(shape: dict) -> tuple:
    c = shape.get("center", [0.0, 0.0])
    if not (isinstance(c, (list, tuple)) and len(c) == 2):
        raise ConfigurationError("initial_shape.center: expected [x, y]")
    return (float(c[0]), float(c[1]))


def _read_polygon(path: Path) -> np.ndarray:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"initial_shape.path: cannot read {path}") from exc
    if text.lstrip().startswith("#"):
        return io.read_snapshot(path).curve.points
    try:
        return np.loadtxt(path, ndmin=2)[:, :2]
    except ValueError as exc:
        raise ConfigurationError("initial_shape.path: malformed polygon file") from exc


def initial_curve(cfg: RunConfig) -> MarkerCurve:
    shape, n = cfg.initial_shape, cfg.n_markers
    kind = shape["type"]
    if kind == "disc":
        pts = exact.disc_boundary(exact.DiscSolution(_number(shape, "r0", float, 1.0), _center(shape)), 0.0, n)
    elif kind == "ellipse":
        a, b = _number(shape, "a"), _number(shape, "b")
        if not a >= b > 0:
            raise ConfigurationError("initial_shape: need a >= b > 0")
        pts = exact.ellipse_boundary(exact.EllipseSolution(a, b, _center(shape)), n)
    elif kind == "fourier_circle":
        modes = shape.get("modes", [])
        try:
            modes = [(int(k), float(amp), float(ph)) for k, amp, ph in modes]
        except (TypeError, ValueError) as exc:
            raise ConfigurationError("initial_shape.modes: expected [[k, amplitude, phase], ...]") from exc
        pts = exact.fourier_boundary(_number(shape, "r0", float, 1.0), modes, n, _center(shape))
    else:
        if "path" not in shape:
            raise ConfigurationError("initial_shape.path: required for polygon_file")
        raw = _read_polygon(cfg.base / shape["path"])
        try:
            curve = MarkerCurve.from_points(raw)
        except PatchError as exc:
            raise ConfigurationError(f"initial_shape.path: {exc}") from exc
        return curve if curve.n == n else resample(curve, n)[0]
    try:
        return MarkerCurve(pts)
    except PatchError as exc:
        raise ConfigurationError(f"initial_shape: {exc}") from exc


# --- subcommands ---------------------------------------------------------------

def _bbox_union(box, pts):
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    if box is None:
        return lo, hi
    return np.minimum(box[0], lo), np.maximum(box[1], hi)


def cmd_run(config_path) -> int:
    cfg = load_config(config_path)
    curve = initial_curve(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(exist_ok=True)
    if cfg.grid is not None:
        (out / "grids").mkdir(exist_ok=True)
    stepper = StepperConfig(ds=cfg.ds, redistribute_every=cfg.redistribute_every, n_markers=cfg.n_markers)
    state = PatchState.initial(curve)
    frames, bbox = [], None

    def record(st: PatchState):
        nonlocal bbox
        grid = None
        if cfg.grid is not None:
            grid = signed_distance_grid(st.curve, n=cfg.grid.n, margin=cfg.grid.margin, s=st.s)
            io.write_grid(out / "grids" / f"grid_{st.step:06d}.csv", grid)
        if cfg.diagnostics == "full":
            rec = full_record(st, gamma=cfg.gamma, c_cal=cfg.c_cal, grid=grid, seed=cfg.seed)
        else:
            rec = cheap_record(st)
        writer.write(rec)
        io.write_snapshot(out / "snapshots" / f"snap_{st.step:06d}.txt", st.curve, st.s)
        if cfg.svg:
            frames.append(st.curve)
            bbox = _bbox_union(bbox, st.curve.points)

    direction = 1.0 if cfg.s_end >= state.s else -1.0
    tol = 1e-12 * max(1.0, abs(cfg.s_end))
    status = EXIT_OK
    with io.DiagnosticsWriter(out / "diagnostics.csv") as writer:
        record(state)
        last_written = state.step
        while direction * (cfg.s_end - state.s) > tol:
            h = direction * min(cfg.ds, abs(cfg.s_end - state.s))
            try:
                nxt = rk4_step(state, stepper, h)
            except TopologyError as exc:
                log.error("blow-up at s=%.6g: %s", state.s, exc)
                state = replace(state, blown_up=True)
                status = EXIT_BLOWUP
                break
            if abs(cfg.s_end - nxt.s) <= tol:
                nxt = replace(nxt, s=float(cfg.s_end))
            state = nxt
            log.debug("step %d s=%.6g", state.step, state.s)
            if state.step % cfg.snapshot_every == 0:
                record(state)
                last_written = state.step
        if last_written != state.step:
            record(state)
    io.write_snapshot(out / "final.txt", state.curve, state.s)
    (out / "status.json").write_text(json.dumps({
        "s": state.s, "t": state.t, "steps": state.step, "blown_up": state.blown_up,
        "generation": state.generation, "exit": status,
    }, indent=2) + "\n")
    if cfg.svg and frames:
        io.write_svg_frames(out / "frames", frames, bbox)
    print(f"{'blow-up' if state.blown_up else 'done'}: s={state.s:.6g} steps={state.step} -> {out}")
    return status


def load_exact_spec(path) -> dict:
    path = Path(path)
    try:
        spec = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigurationError(f"exact spec: cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"exact spec: invalid JSON ({exc})") from exc
    if not isinstance(spec, dict) or spec.get("solution") not in ("disc", "ellipse"):
        raise ConfigurationError("solution: expected 'disc' or 'ellipse'")
    return spec


def _exact_solution(spec: dict):
    if spec["solution"] == "disc":
        return exact.DiscSolution(_number(spec, "r0", float, 1.0), _center(spec))
    try:
        return exact.EllipseSolution(_number(spec, "a"), _number(spec, "b"), _center(spec))
    except ConfigurationError as exc:
        raise ConfigurationError(f"a, b: {exc}") from exc


def compare_to_exact(curve: MarkerCurve, s: float, spec: dict) -> dict:
    """Marker deviation from the analytic boundary at time ``s``."""
    sol = _exact_solution(spec)
    p = curve.points
    if isinstance(sol, exact.DiscSolution):
        r = np.hypot(*(p - sol.c).T)
        dev = np.abs(r - exact.disc_radius(sol, s))
        return {"max": float(dev.max()), "mean": float(dev.mean())}
    axes = exact.ellipse_axes_at(sol, s, ds=float(spec.get("ds", 1e-3)))
    y = p - np.asarray(sol.center, float)
    f = (y[:, 0] / axes.a) ** 2 + (y[:, 1] / axes.b) ** 2 - 1.0
    grad = np.hypot(2 * y[:, 0] / axes.a ** 2, 2 * y[:, 1] / axes.b ** 2)
    dev = np.abs(f) / grad  # first-order distance to the ellipse
    _, a_fit, b_fit, _ = exact.fit_ellipse(p)
    return {"max": float(dev.max()), "mean": float(dev.mean()),
            "a": axes.a, "b": axes.b, "a_fit": a_fit, "b_fit": b_fit,
            "axis_deviation": max(abs(a_fit - axes.a), abs(b_fit - axes.b))}


def cmd_compare(snapshot_path, spec_path) -> int:
    snap = io.read_snapshot(snapshot_path)
    spec = load_exact_spec(spec_path)
    s = float(spec.get("s", snap.s))
    if abs(s - snap.s) > 1e-9 * max(1.0, abs(s)):
        raise ConfigurationError(f"s: snapshot s={snap.s!r} does not match exact spec s={s!r}")
    report = compare_to_exact(snap.curve, snap.s, spec)
    tol = float(spec.get("tolerance", 1e-4))
    key = "axis_deviation" if "axis_deviation" in report else "max"
    report["tolerance"] = tol
    report["pass"] = report[key] <= tol
    print(json.dumps(report))
    return EXIT_OK if report["pass"] else EXIT_CONFIG


def cmd_diag(snapshot_path, grid_path=None, initial_path=None, gamma: float = 0.5, seed: int = 0) -> int:
    snap = io.read_snapshot(snapshot_path)
    grid = io.read_grid(grid_path) if grid_path else None
    labels, area0 = None, math.nan
    if initial_path:
        init = io.read_snapshot(initial_path)
        area0 = float(np.exp(init.s) * smooth_moments(init.curve.points)[0])
        if init.curve.n == snap.curve.n:
            labels = init.curve.points
    state = PatchState(curve=snap.curve, s=snap.s, area0=area0, labels=labels)
    rec = full_record(state, gamma=gamma, grid=grid, seed=seed, compute_q=grid is not None)
    if initial_path is None:
        rec = replace(rec, area_ratio_error=math.nan, mu=math.nan)
    elif labels is None:
        rec = replace(rec, mu=math.nan)
    if grid is None:
        log.warning("no grid given: q and log_bound_ratio unavailable")
    print(",".join(COLUMNS))
    print(",".join(repr(float(v)) for v in rec.as_row()))
    return EXIT_OK


def cmd_exact(spec_path, output=None) -> int:
    spec = load_exact_spec(spec_path)
    sol = _exact_solution(spec)
    s = float(spec.get("s", 0.0))
    n = int(spec.get("n", 256))
    if n < 8:
        raise ConfigurationError("n ≥ 8")
    if isinstance(sol, exact.DiscSolution):
        pts = exact.disc_boundary(sol, s, n)
    else:
        pts = exact.ellipse_boundary(exact.ellipse_axes_at(sol, s, ds=float(spec.get("ds", 1e-3))), n)
    curve = MarkerCurve(pts)
    if output:
        io.write_snapshot(output, curve, s)
    else:
        sys.stdout.write(io.format_snapshot_header(curve, s) + "\n")
        sys.stdout.writelines(f"{x:.17g} {y:.17g}\n" for x, y in pts)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aggpatch", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="contour-dynamics run from a JSON config")
    p.add_argument("config")
    p = sub.add_parser("compare", help="compare a snapshot with an analytic solution")
    p.add_argument("snapshot")
    p.add_argument("exact_spec")
    p = sub.add_parser("diag", help="diagnostics row for a snapshot")
    p.add_argument("snapshot")
    p.add_argument("grid", nargs="?")
    p.add_argument("--initial", help="initial snapshot, for mu and the area ratio")
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p = sub.add_parser("exact", help="emit an analytic boundary as a snapshot")
    p.add_argument("spec")
    p.add_argument("-o", "--output")
    return parser


def main(argv=None) -> int:
    level = os.environ.get("LOGLEVEL", "warn").lower()
    logging.basicConfig(level=_LEVELS.get(level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "compare":
            return cmd_compare(args.snapshot, args.exact_spec)
        if args.command == "diag":
            return cmd_diag(args.snapshot, args.grid, args.initial, args.gamma, args.seed)
        return cmd_exact(args.spec, args.output)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
