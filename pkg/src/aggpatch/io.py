"""Plain-text persistence: snapshots, defining grids, diagnostics CSV and SVG frames.

Snapshot file::

    # s=<s> t=<t> area=<a> cx=<x> cy=<y> n=<N>
    x_0 y_0
    ...

Coordinates use 17 significant digits so a write/read cycle is bit exact.

Grid file: the first line is a JSON object with ``origin``, ``spacing``,
``nx``, ``ny`` and ``s``; then ``ny`` comma-separated rows of ``nx`` node
values, row ``j`` holding ``y = origin[1] + j * spacing``.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .diagnostics import COLUMNS, DiagnosticsRecord
from .errors import ConfigurationError
from .geometry import MarkerCurve, smooth_moments
from .levelset import DefiningGrid

_HEADER = re.compile(r"^#\s*(.*)$")


@dataclass(frozen=True)
class SnapshotFile:
    s: float
    curve: MarkerCurve
    header: dict

    @property
    def t(self) -> float:
        return -math.expm1(-self.s)


def format_snapshot_header(curve: MarkerCurve, s: float) -> str:
    area, c = smooth_moments(curve.points)
    s = float(s)
    t = -math.expm1(-s)
    return f"# s={s!r} t={t!r} area={float(area)!r} cx={float(c[0])!r} cy={float(c[1])!r} n={curve.n}"


def write_snapshot(path, curve: MarkerCurve, s: float) -> Path:
    path = Path(path)
    lines = [format_snapshot_header(curve, s)]
    lines += [f"{x:.17g} {y:.17g}" for x, y in curve.points]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_snapshot(path) -> SnapshotFile:
    path = Path(path)
    try:
        text = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigurationError(f"cannot read snapshot {path}: {exc}") from exc
    if not text or not _HEADER.match(text[0]):
        raise ConfigurationError(f"{path}: missing '# s=...' header")
    header = {}
    for item in _HEADER.match(text[0]).group(1).split():
        key, _, val = item.partition("=")
        header[key] = val
    if "s" not in header:
        raise ConfigurationError(f"{path}: header lacks s")
    rows = [ln.split() for ln in text[1:] if ln.strip() and not ln.startswith("#")]
    try:
        pts = np.array([[float(a), float(b)] for a, b in rows])
    except ValueError as exc:
        raise ConfigurationError(f"{path}: malformed coordinate line") from exc
    if "n" in header and int(header["n"]) != len(pts):
        raise ConfigurationError(f"{path}: header n={header['n']} but {len(pts)} markers")
    return SnapshotFile(s=float(header["s"]), curve=MarkerCurve(pts), header=header)


def write_grid(path, grid: DefiningGrid) -> Path:
    path = Path(path)
    head = {"origin": list(map(float, grid.origin)), "spacing": grid.spacing,
            "nx": grid.nx, "ny": grid.ny, "s": grid.s}
    with path.open("w", newline="") as fh:
        fh.write(json.dumps(head) + "\n")
        np.savetxt(fh, grid.values, delimiter=",", fmt="%.17g")
    return path


def read_grid(path) -> DefiningGrid:
    path = Path(path)
    try:
        with path.open() as fh:
            head = json.loads(fh.readline())
            values = np.loadtxt(fh, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read grid {path}: {exc}") from exc
    missing = {"origin", "spacing", "nx", "ny"} - head.keys()
    if missing:
        raise ConfigurationError(f"{path}: grid header lacks {sorted(missing)}")
    return DefiningGrid(tuple(head["origin"]), float(head["spacing"]), int(head["nx"]),
                        int(head["ny"]), values, float(head.get("s", 0.0)))


class DiagnosticsWriter:
    """Append-only CSV with the fixed diagnostics column order."""

    def __init__(self, path):
        self.path = Path(path)
        self._fh = self.path.open("w", newline="")
        self._w = csv.writer(self._fh)
        self._w.writerow(COLUMNS)

    def write(self, rec: DiagnosticsRecord) -> None:
        self._w.writerow([repr(float(v)) for v in rec.as_row()])
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_diagnostics(path) -> list[DiagnosticsRecord]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        head = tuple(next(reader))
        if head != COLUMNS:
            raise ConfigurationError(f"{path}: unexpected columns {head}")
        return [DiagnosticsRecord.from_row(row) for row in reader]


def write_svg_frames(directory, curves, bbox, stroke: str = "#1f3b73") -> list[Path]:
    """One ``frame_%06d.svg`` per curve, all sharing the viewBox of ``bbox``."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (x0, y0), (x1, y1) = bbox
    pad = 0.05 * max(x1 - x0, y1 - y0)
    x0, y0, x1, y1 = x0 - pad, y0 - pad, x1 + pad, y1 + pad
    w, h = x1 - x0, y1 - y0
    width = 0.004 * max(w, h)
    paths = []
    for k, curve in enumerate(curves):
        p = curve.points
        # flip y so the picture is in the usual orientation
        pts = " ".join(f"{x:.6g},{y0 + y1 - y:.6g}" for x, y in np.vstack([p, p[:1]]))
        svg = (
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6g} {y0:.6g} {w:.6g} {h:.6g}">\n'
            f'  <polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width:.3g}"/>\n'
            "</svg>\n"
        )
        out = directory / f"frame_{k:06d}.svg"
        out.write_text(svg)
        paths.append(out)
    return paths
