"""Closed marker curves: normals, moments, redistribution and regularity proxies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, GeometryError, TopologyError

MIN_MARKERS = 8
_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


def periodic_derivative(points: np.ndarray) -> np.ndarray:
    """Fourth-order central difference of a periodic sequence w.r.t. its index."""
    p = np.asarray(points, dtype=float)
    return (8.0 * (np.roll(p, -1, 0) - np.roll(p, 1, 0)) - (np.roll(p, -2, 0) - np.roll(p, 2, 0))) / 12.0


def shoelace_area(points: np.ndarray) -> float:
    x, y = np.asarray(points, dtype=float).T
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def segment_lengths(points: np.ndarray) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    return np.linalg.norm(np.roll(p, -1, 0) - p, axis=1)


@dataclass(frozen=True, eq=False)
class MarkerCurve:
    """Counterclockwise closed polyline of at least eight boundary markers."""

    points: np.ndarray

    def __post_init__(self):
        p = np.array(self.points, dtype=float, copy=True)
        if p.ndim != 2 or p.shape[1] != 2:
            raise GeometryError(f"markers must have shape (N, 2), got {p.shape}")
        if p.shape[0] < MIN_MARKERS:
            raise GeometryError(f"need at least {MIN_MARKERS} markers, got {p.shape[0]}")
        if not np.all(np.isfinite(p)):
            raise GeometryError("non-finite marker coordinates")
        if shoelace_area(p) <= 0.0:
            raise GeometryError("curve must be counterclockwise with positive area")
        span = float(np.max(np.ptp(p, axis=0)))
        if np.min(segment_lengths(p)) <= 1e-12 * span:
            raise GeometryError("consecutive markers coincide")
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @classmethod
    def from_points(cls, points, orient: bool = True) -> "MarkerCurve":
        """Build a curve, reversing clockwise input when ``orient`` is set."""
        p = np.asarray(points, dtype=float)
        if orient and p.ndim == 2 and p.shape[0] >= 3 and shoelace_area(p) < 0:
            p = p[::-1]
        return cls(p)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def translated(self, offset) -> "MarkerCurve":
        return MarkerCurve(self.points + np.asarray(offset, dtype=float))

    def scaled(self, factor: float, about=None) -> "MarkerCurve":
        c = np.zeros(2) if about is None else np.asarray(about, dtype=float)
        return MarkerCurve(c + factor * (self.points - c))


@dataclass(frozen=True)
class CurveMetrics:
    """Polygon moments plus high-order moments of the smooth curve through the markers.

    ``area``/``centroid`` are the exact polygon (shoelace) values.
    ``smooth_area``/``smooth_centroid`` use the fourth-order periodic
    derivative; they are what the dynamics conserve to high accuracy.
    """

    area: float
    centroid: np.ndarray
    perimeter: float
    min_spacing: float
    max_spacing: float
    diameter: float
    smooth_area: float = field(default=math.nan)
    smooth_centroid: np.ndarray = field(default_factory=lambda: np.full(2, math.nan))


def polygon_centroid(points: np.ndarray) -> np.ndarray:
    x, y = np.asarray(points, dtype=float).T
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * np.sum(cross)
    return np.array([np.sum((x + xn) * cross), np.sum((y + yn) * cross)]) / (6.0 * a)


def smooth_moments(points: np.ndarray) -> tuple[float, np.ndarray]:
    """Area and centroid of the smooth curve interpolating the markers.

    Trapezoid rule in the marker parameter applied to the boundary forms
    ``(x dy - y dx)/2``, ``x^2 dy / 2`` and ``-y^2 dx / 2``.
    """
    p = np.asarray(points, dtype=float)
    dp = periodic_derivative(p)
    x, y = p.T
    dx, dy = dp.T
    area = 0.5 * float(np.sum(x * dy - y * dx))
    cx = 0.5 * float(np.sum(x * x * dy)) / area
    cy = -0.5 * float(np.sum(y * y * dx)) / area
    return area, np.array([cx, cy])


def diameter(points: np.ndarray) -> float:
    p = np.asarray(points, dtype=float)
    best = 0.0
    for lo in range(0, len(p), 1024):
        d = np.linalg.norm(p[lo:lo + 1024, None, :] - p[None, :, :], axis=-1)
        best = max(best, float(d.max()))
    return best


def metrics(curve: MarkerCurve) -> CurveMetrics:
    p = curve.points
    seg = segment_lengths(p)
    sa, sc = smooth_moments(p)
    return CurveMetrics(
        area=shoelace_area(p),
        centroid=polygon_centroid(p),
        perimeter=float(seg.sum()),
        min_spacing=float(seg.min()),
        max_spacing=float(seg.max()),
        diameter=diameter(p),
        smooth_area=sa,
        smooth_centroid=sc,
    )


def unit_tangents(curve: MarkerCurve) -> np.ndarray:
    d = periodic_derivative(curve.points)
    norm = np.linalg.norm(d, axis=1)
    scale = max(float(np.max(norm)), 1e-300)
    if np.any(norm <= 1e-12 * scale):
        raise GeometryError("degenerate local geometry: vanishing tangent")
    return d / norm[:, None]


def outward_normals(curve: MarkerCurve) -> np.ndarray:
    """Unit outward normals at every marker (tangent rotated by -pi/2)."""
    t = unit_tangents(curve)
    return np.column_stack([t[:, 1], -t[:, 0]])


def outward_normal(curve: MarkerCurve, i: int) -> np.ndarray:
    p = curve.points
    n = len(p)
    idx = [(i + k) % n for k in (-2, -1, 1, 2)]
    d = (8.0 * (p[idx[2]] - p[idx[1]]) - (p[idx[3]] - p[idx[0]])) / 12.0
    nd = float(np.hypot(*d))
    if nd <= 1e-12 * float(np.max(np.ptp(p, axis=0))):
        raise GeometryError(f"degenerate local geometry at marker {i}")
    return np.array([d[1], -d[0]]) / nd


# --- redistribution -------------------------------------------------------

def _segments_intersect(p: np.ndarray) -> bool:
    """O(N^2) proper-intersection test between non-adjacent polyline segments."""
    n = len(p)
    a = p
    b = np.roll(p, -1, 0)

    def orient(p0, p1, q):
        return (p1[..., 0] - p0[..., 0]) * (q[..., 1] - p0[..., 1]) - (p1[..., 1] - p0[..., 1]) * (q[..., 0] - p0[..., 0])

    idx = np.arange(n)
    for lo in range(0, n, 512):
        i = idx[lo:lo + 512]
        ai, bi = a[i][:, None, :], b[i][:, None, :]
        aj, bj = a[None, :, :], b[None, :, :]
        o1 = orient(ai, bi, aj)
        o2 = orient(ai, bi, bj)
        o3 = orient(aj, bj, ai)
        o4 = orient(aj, bj, bi)
        hit = (o1 * o2 < 0) & (o3 * o4 < 0)
        gap = np.abs(i[:, None] - idx[None, :])
        adjacent = (gap <= 1) | (gap == n - 1)
        if np.any(hit & ~adjacent):
            return True
    return False


def self_intersects(curve_or_points) -> bool:
    p = curve_or_points.points if isinstance(curve_or_points, MarkerCurve) else np.asarray(curve_or_points, float)
    return _segments_intersect(p)


def resample(curve: MarkerCurve, n_target: int, carried: np.ndarray | None = None):
    """Equispace ``n_target`` markers in arc length along a periodic cubic spline.

    ``carried`` is an optional per-marker array (e.g. Lagrangian labels)
    interpolated with the same spline parameter.  Returns ``(curve, carried)``.
    """
    if n_target < MIN_MARKERS:
        raise ConfigurationError(f"n_target must be >= {MIN_MARKERS}")
    p = curve.points
    closed = np.vstack([p, p[:1]])
    u = np.concatenate([[0.0], np.cumsum(segment_lengths(p))])
    spline = CubicSpline(u, closed, bc_type="periodic")

    # arc length per knot interval by 8-point Gauss-Legendre
    a, b = u[:-1], u[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    nodes = mid[:, None] + half[:, None] * _GAUSS_X
    speed = np.linalg.norm(spline(nodes, 1), axis=-1)
    arc = np.concatenate([[0.0], np.cumsum(half * (speed @ _GAUSS_W))])
    total = arc[-1]

    target = np.arange(n_target) * total / n_target
    k = np.clip(np.searchsorted(arc, target, side="right") - 1, 0, len(a) - 1)
    ut = u[k] + (target - arc[k]) / np.maximum(arc[k + 1] - arc[k], 1e-300) * (u[k + 1] - u[k])
    for _ in range(8):
        m = 0.5 * (u[k][:, None] + ut[:, None]) + 0.5 * (ut - u[k])[:, None] * _GAUSS_X
        partial = 0.5 * (ut - u[k]) * (np.linalg.norm(spline(m, 1), axis=-1) @ _GAUSS_W)
        resid = arc[k] + partial - target
        ut = ut - resid / np.linalg.norm(spline(ut, 1), axis=-1)
        if np.max(np.abs(resid)) < 1e-14 * total:
            break

    new_points = spline(ut)
    if _segments_intersect(new_points):
        raise TopologyError("redistributed curve self-intersects")
    new_carried = None
    if carried is not None:
        c = np.asarray(carried, dtype=float)
        cs = CubicSpline(u, np.concatenate([c, c[:1]], axis=0), bc_type="periodic")
        new_carried = cs(ut)
    try:
        return MarkerCurve(new_points), new_carried
    except GeometryError as exc:
        raise TopologyError(f"redistribution produced an invalid curve: {exc}") from exc


def redistribute(curve: MarkerCurve, n_target: int) -> MarkerCurve:
    return resample(curve, n_target)[0]


# --- regularity diagnostics ------------------------------------------------

def bilipschitz_lower(curve0: MarkerCurve, curve1: MarkerCurve) -> float:
    """Discrete inverse-Lipschitz constant ``max |a_i - a_j| / |X_i - X_j|``.

    Returns ``inf`` when two image markers coincide (blow-up sentinel).
    """
    a = curve0.points if isinstance(curve0, MarkerCurve) else np.asarray(curve0, float)
    x = curve1.points if isinstance(curve1, MarkerCurve) else np.asarray(curve1, float)
    if a.shape != x.shape:
        raise ConfigurationError("curves must have identical marker counts")
    n = len(a)
    best = 0.0
    for lo in range(0, n, 1024):
        da = np.linalg.norm(a[lo:lo + 1024, None] - a[None], axis=-1)
        dx = np.linalg.norm(x[lo:lo + 1024, None] - x[None], axis=-1)
        rows = np.arange(lo, min(lo + 1024, n))
        da[rows - lo, rows] = 0.0
        if np.any((dx == 0) & (da > 0)):
            return math.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(da > 0, da / np.where(dx > 0, dx, 1.0), 0.0)
        best = max(best, float(ratio.max()))
    return best


def _pairwise_holder(values: np.ndarray, dist_rows, n: int, gamma: float) -> float:
    best = 0.0
    found = False
    for lo in range(0, n, 512):
        hi = min(lo + 512, n)
        dist = dist_rows(lo, hi)
        dv = np.linalg.norm(values[lo:hi, None, :] - values[None, :, :], axis=-1)
        ok = dist > 0
        if np.any(ok):
            found = True
            best = max(best, float(np.max(dv[ok] / dist[ok] ** gamma)))
    if not found:
        raise GeometryError("all sample points coincide")
    return best


def holder_seminorm(points, values, gamma: float) -> float:
    """Brute-force ``sup |f(x) - f(y)| / |x - y|^gamma`` over all sample pairs.

    Pairs of coincident sample points are skipped.
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    f = np.asarray(values, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if len(x) < 2 or len(x) != len(f):
        raise ConfigurationError("need at least two samples with matching values")

    def rows(lo, hi):
        return np.linalg.norm(x[lo:hi, None, :] - x[None, :, :], axis=-1)

    return _pairwise_holder(f, rows, len(x), gamma)


def arc_parameters(curve: MarkerCurve) -> tuple[np.ndarray, float]:
    seg = segment_lengths(curve.points)
    return np.concatenate([[0.0], np.cumsum(seg)[:-1]]), float(seg.sum())


def tangent_holder_diagnostic(curve: MarkerCurve, gamma: float, metric: str = "arc") -> float:
    """Hölder seminorm of the unit tangent field sampled at the markers.

    ``metric="arc"`` measures separation by the shorter polyline arc between
    markers; ``metric="chord"`` uses Euclidean distance.  A chart-free proxy
    for the C^{1+gamma} character of the curve, not the chart norm itself.
    """
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    t = unit_tangents(curve)
    n = curve.n
    if metric == "chord":
        return holder_seminorm(curve.points, t, gamma)
    if metric != "arc":
        raise ConfigurationError(f"unknown metric {metric!r}")
    s, total = arc_parameters(curve)

    def rows(lo, hi):
        d = np.abs(s[lo:hi, None] - s[None, :])
        return np.minimum(d, total - d)

    return _pairwise_holder(t, rows, n, gamma)


# --- point location --------------------------------------------------------

def winding_numbers(points: np.ndarray, queries) -> np.ndarray:
    """Integer winding number of the closed polyline around each query point."""
    p = np.asarray(points, dtype=float)
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    a = p
    b = np.roll(p, -1, 0)
    out = np.zeros(len(q), dtype=np.int64)
    for lo in range(0, len(q), 4096):
        qx = q[lo:lo + 4096, 0][:, None]
        qy = q[lo:lo + 4096, 1][:, None]
        is_left = (b[:, 0] - a[:, 0]) * (qy - a[:, 1]) - (qx - a[:, 0]) * (b[:, 1] - a[:, 1])
        up = (a[:, 1] <= qy) & (b[:, 1] > qy) & (is_left > 0)
        down = (a[:, 1] > qy) & (b[:, 1] <= qy) & (is_left < 0)
        out[lo:lo + 4096] = up.sum(1) - down.sum(1)
    return out


def contains(curve: MarkerCurve, queries) -> np.ndarray:
    return winding_numbers(curve.points, queries) != 0


def distance_to_polyline(points: np.ndarray, queries) -> tuple[np.ndarray, np.ndarray]:
    """Distance from each query to the closed polyline and the nearest point on it."""
    p = np.asarray(points, dtype=float)
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    a = p
    ab = np.roll(p, -1, 0) - p
    ab2 = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    dist = np.empty(len(q))
    near = np.empty((len(q), 2))
    for lo in range(0, len(q), 2048):
        qq = q[lo:lo + 2048]
        aq = qq[:, None, :] - a[None, :, :]
        t = np.clip(np.sum(aq * ab[None], axis=-1) / ab2, 0.0, 1.0)
        proj = a[None] + t[..., None] * ab[None]
        d = np.linalg.norm(qq[:, None, :] - proj, axis=-1)
        k = np.argmin(d, axis=1)
        rows = np.arange(len(qq))
        dist[lo:lo + 2048] = d[rows, k]
        near[lo:lo + 2048] = proj[rows, k]
    return dist, near
