"""Defining functions transported by the patch flow.

The transported function ``phi(x, s) = Phi0(X^{-1}(x, s))`` vanishes on the
boundary but its gradient jumps there; multiplying by ``exp(-s)`` inside the
patch removes the jump.  Rather than solving the transport equation with a
source term on the grid, grid nodes are traced back along the flow with RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import (
    ConfigurationError,
    CoverageError,
    DegenerateDefiningFunctionError,
    DomainError,
    EscapeError,
)
from .field import velocity_field
from .geometry import (
    MarkerCurve,
    contains,
    distance_to_polyline,
    holder_seminorm,
    metrics,
    outward_normals,
    unit_tangents,
)


@dataclass(frozen=True, eq=False)
class DefiningGrid:
    """Samples of a scalar field on a uniform grid; ``values[j, i]`` is at ``origin + (i, j) * spacing``."""

    origin: tuple
    spacing: float
    nx: int
    ny: int
    values: np.ndarray
    s: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.ny, self.nx):
            raise ConfigurationError(f"values shape {v.shape} != (ny, nx) = {(self.ny, self.nx)}")
        if not self.spacing > 0:
            raise ConfigurationError("spacing must be > 0")
        if self.nx < 4 or self.ny < 4:
            raise ConfigurationError("grid needs at least 4 nodes per axis")
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("grid values must be finite")
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, fn, origin, spacing, nx, ny, s: float = 0.0) -> "DefiningGrid":
        geom = cls(origin, spacing, nx, ny, np.zeros((ny, nx)), s)
        return replace(geom, values=np.asarray(fn(geom.nodes()), dtype=float))

    @classmethod
    def covering(cls, lo, hi, n: int, values_fn=None, s: float = 0.0) -> "DefiningGrid":
        """Square-celled grid with ``n`` nodes along the longer side of the box ``[lo, hi]``."""
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        h = float(np.max(hi - lo)) / (n - 1)
        nx, ny = (np.round((hi - lo) / h).astype(int) + 1)
        fn = values_fn or (lambda pts: np.zeros(pts.shape[:-1]))
        return cls.from_function(fn, tuple(lo), h, int(nx), int(ny), s)

    @property
    def xs(self) -> np.ndarray:
        return self.origin[0] + self.spacing * np.arange(self.nx)

    @property
    def ys(self) -> np.ndarray:
        return self.origin[1] + self.spacing * np.arange(self.ny)

    @property
    def upper(self) -> tuple:
        return (self.xs[-1], self.ys[-1])

    def nodes(self) -> np.ndarray:
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.stack([gx, gy], axis=-1)

    def _spline(self) -> RectBivariateSpline:
        spl = self.__dict__.get("_cached_spline")
        if spl is None:
            spl = RectBivariateSpline(self.xs, self.ys, self.values.T, kx=3, ky=3)
            object.__setattr__(self, "_cached_spline", spl)
        return spl

    def _check_inside(self, pts: np.ndarray) -> None:
        lo = np.array(self.origin)
        hi = np.array(self.upper)
        tol = 1e-9 * self.spacing
        if np.any(pts < lo - tol) or np.any(pts > hi + tol):
            raise DomainError("evaluation point outside the grid")

    def evaluate(self, points) -> np.ndarray:
        """Bicubic spline interpolation of the node values."""
        pts = np.asarray(points, dtype=float)
        self._check_inside(pts.reshape(-1, 2))
        flat = pts.reshape(-1, 2)
        return self._spline().ev(flat[:, 0], flat[:, 1]).reshape(pts.shape[:-1])

    def gradient(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        self._check_inside(pts.reshape(-1, 2))
        flat = pts.reshape(-1, 2)
        spl = self._spline()
        gx = spl.ev(flat[:, 0], flat[:, 1], dx=1)
        gy = spl.ev(flat[:, 0], flat[:, 1], dy=1)
        return np.column_stack([gx, gy]).reshape(pts.shape)

    def node_gradient(self) -> np.ndarray:
        """Central differences at interior nodes (one-sided at the border)."""
        gy, gx = np.gradient(self.values, self.spacing)
        return np.stack([gx, gy], axis=-1)


def signed_distance_grid(curve: MarkerCurve, n: int = 128, margin: float = 0.25, s: float = 0.0) -> DefiningGrid:
    """Signed distance to the polyline (negative inside) on a box around the curve."""
    p = curve.points
    lo, hi = p.min(axis=0), p.max(axis=0)
    pad = margin * float(np.max(hi - lo))
    grid = DefiningGrid.covering(lo - pad, hi + pad, n, s=s)
    nodes = grid.nodes().reshape(-1, 2)
    dist, _ = distance_to_polyline(p, nodes)
    sign = np.where(contains(curve, nodes), -1.0, 1.0)
    return replace(grid, values=(sign * dist).reshape(grid.ny, grid.nx))


# --- flow history and inverse flow -----------------------------------------

@dataclass(frozen=True)
class Snapshot:
    s: float
    curve: MarkerCurve
    generation: int = 0


@dataclass(frozen=True)
class FlowHistory:
    """Time-ordered boundary snapshots of a run; linear interpolation in ``s``."""

    snapshots: tuple

    def __post_init__(self):
        snaps = tuple(sorted(self.snapshots, key=lambda sn: sn.s))
        if len(snaps) < 1:
            raise ConfigurationError("history needs at least one snapshot")
        ss = np.array([sn.s for sn in snaps])
        if np.any(np.diff(ss) <= 0):
            raise ConfigurationError("snapshot times must be strictly increasing")
        object.__setattr__(self, "snapshots", snaps)

    @classmethod
    def from_states(cls, states: Sequence) -> "FlowHistory":
        return cls(tuple(Snapshot(st.s, st.curve, st.generation) for st in states))

    @property
    def times(self) -> np.ndarray:
        return np.array([sn.s for sn in self.snapshots])

    def curve_at(self, s: float) -> MarkerCurve:
        """Snapshot curve at ``s`` (exact snapshot time, else the nearest one)."""
        ts = self.times
        k = int(np.argmin(np.abs(ts - s)))
        return self.snapshots[k].curve

    def check_coverage(self, s0: float, s1: float) -> None:
        ts = self.times
        lo, hi = min(s0, s1), max(s0, s1)
        tol = 1e-9 * max(1.0, abs(lo), abs(hi))
        if ts[0] > lo + tol or ts[-1] < hi - tol:
            raise CoverageError(f"history covers [{ts[0]:.6g}, {ts[-1]:.6g}], need [{lo:.6g}, {hi:.6g}]")
        inside = ts[(ts >= lo - tol) & (ts <= hi + tol)]
        if len(inside) >= 3:
            gaps = np.diff(inside)
            if np.max(gaps) > 2.0 * np.median(gaps) * (1 + 1e-9):
                raise CoverageError("history gap exceeds twice the nominal spacing")

    def velocity(self, points: np.ndarray, s: float) -> np.ndarray:
        """Velocity at time ``s``: markers interpolated linearly between snapshots
        of the same generation, otherwise the two fields interpolated."""
        ts = self.times
        k = int(np.clip(np.searchsorted(ts, s) - 1, 0, len(ts) - 2)) if len(ts) > 1 else 0
        a = self.snapshots[k]
        if len(ts) == 1 or abs(s - a.s) <= 1e-14 * max(1.0, abs(s)):
            return velocity_field(a.curve, points)
        b = self.snapshots[k + 1]
        if abs(s - b.s) <= 1e-14 * max(1.0, abs(s)):
            return velocity_field(b.curve, points)
        w = (s - a.s) / (b.s - a.s)
        if a.generation == b.generation and a.curve.n == b.curve.n:
            mid = MarkerCurve((1 - w) * a.curve.points + w * b.curve.points)
            return velocity_field(mid, points)
        return (1 - w) * velocity_field(a.curve, points) + w * velocity_field(b.curve, points)


def inverse_flow(history: FlowHistory, points, s: float, bbox: Optional[tuple] = None) -> np.ndarray:
    """Pre-images ``X^{-1}(x, s)`` of many points by RK4 along the snapshot times.

    Solves ``dY/dsigma = v(Y, sigma)`` with ``Y(s) = x`` down (or up) to
    ``sigma = 0``, one step per snapshot interval.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if s == 0.0:
        return pts.copy()
    history.check_coverage(0.0, s)
    ts = history.times
    lo, hi = min(0.0, s), max(0.0, s)
    tol = 1e-12 * max(1.0, abs(s))
    knots = ts[(ts > lo + tol) & (ts < hi - tol)]
    knots = np.concatenate([[lo], knots, [hi]])
    if s > 0:
        knots = knots[::-1]
    if bbox is None:
        m = metrics(history.curve_at(0.0))
        c, r = m.smooth_centroid, 50.0 * m.diameter + float(np.max(np.abs(pts - m.smooth_centroid)))
        bbox = ((c[0] - r, c[1] - r), (c[0] + r, c[1] + r))
    lo_box, hi_box = np.asarray(bbox[0], float), np.asarray(bbox[1], float)

    y = pts.copy()
    for s0, s1 in zip(knots[:-1], knots[1:]):
        h = s1 - s0
        k1 = history.velocity(y, s0)
        k2 = history.velocity(y + 0.5 * h * k1, s0 + 0.5 * h)
        k3 = history.velocity(y + 0.5 * h * k2, s0 + 0.5 * h)
        k4 = history.velocity(y + h * k3, s1)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.any(y < lo_box) or np.any(y > hi_box) or not np.all(np.isfinite(y)):
            raise EscapeError("trajectory left the bounding box")
    return y


def inverse_flow_point(history: FlowHistory, x, s: float, bbox: Optional[tuple] = None) -> np.ndarray:
    return inverse_flow(history, np.asarray(x, dtype=float)[None], s, bbox)[0]


def grid_preimages(history: FlowHistory, target: DefiningGrid, s: float) -> np.ndarray:
    """Pre-images of every node of ``target``, shape ``(ny, nx, 2)``."""
    nodes = target.nodes()
    return inverse_flow(history, nodes.reshape(-1, 2), s).reshape(nodes.shape)


def transport_phi(
    history: FlowHistory,
    phi0: DefiningGrid,
    s: float,
    corrected: bool = True,
    target: Optional[DefiningGrid] = None,
    preimages: Optional[np.ndarray] = None,
) -> DefiningGrid:
    """Transport ``phi0`` to time ``s`` on the nodes of ``target`` (default: ``phi0``'s grid).

    With ``corrected`` the values at nodes inside the patch at time ``s`` are
    multiplied by ``exp(-s)``.  ``preimages`` may carry the result of
    :func:`grid_preimages` to avoid tracing twice.
    """
    target = phi0 if target is None else target
    if preimages is None:
        preimages = grid_preimages(history, target, s)
    values = phi0.evaluate(preimages)
    if corrected:
        curve = history.curve_at(s)
        inside = contains(curve, target.nodes().reshape(-1, 2)).reshape(values.shape)
        values = np.where(inside, math.exp(-s) * values, values)
    return replace(target, values=values, s=s)


# --- jump and regularity measurements ---------------------------------------

@dataclass(frozen=True)
class JumpReport:
    offset: float
    inside_slope: np.ndarray
    outside_slope: np.ndarray

    @property
    def jump(self) -> np.ndarray:
        return np.abs(self.outside_slope - self.inside_slope)

    @property
    def ratio(self) -> np.ndarray:
        return self.inside_slope / self.outside_slope

    @property
    def max_jump(self) -> float:
        return float(np.max(self.jump))

    @property
    def mean_ratio(self) -> float:
        return float(np.mean(self.ratio))


def gradient_jump(grid: DefiningGrid, curve: MarkerCurve, offset: float, stencil: str = "two-point") -> JumpReport:
    """One-sided normal derivatives of the grid field at every marker.

    ``stencil="two-point"`` uses ``(Phi(x + h n) - Phi(x)) / h`` and its
    mirror; ``"three-point"`` adds the samples at ``2h`` for second-order
    one-sided differences.
    """
    diam = metrics(curve).diameter
    if offset < 2.0 * grid.spacing - 1e-12 or offset > 0.1 * diam + 1e-12:
        raise ConfigurationError("offset must satisfy 2*spacing <= h <= 0.1*diameter")
    p = curve.points
    n = outward_normals(curve)
    h = offset
    on = grid.evaluate(p)
    out = grid.evaluate(p + h * n)
    inn = grid.evaluate(p - h * n)
    if stencil == "two-point":
        return JumpReport(offset=h, inside_slope=(on - inn) / h, outside_slope=(out - on) / h)
    if stencil == "three-point":
        out2 = grid.evaluate(p + 2 * h * n)
        inn2 = grid.evaluate(p - 2 * h * n)
        return JumpReport(
            offset=h,
            inside_slope=(3 * on - 4 * inn + inn2) / (2 * h),
            outside_slope=(-3 * on + 4 * out - out2) / (2 * h),
        )
    raise ConfigurationError("stencil must be 'two-point' or 'three-point'")


def q_of_domain(
    grid: DefiningGrid,
    curve: MarkerCurve,
    gamma: float,
    tube_width: float,
    max_nodes: int = 10_000,
    seed: int = 0,
) -> float:
    """``||grad Phi||_gamma / |grad Phi|_inf`` with the seminorm taken over a boundary tube.

    The seminorm is restricted to nodes within ``tube_width`` of the curve;
    over the whole plane it diverges for polynomial defining functions.
    """
    if tube_width < 4.0 * grid.spacing:
        raise ConfigurationError("tube_width must be >= 4 * grid spacing")
    grad_nodes = grid.node_gradient()[1:-1, 1:-1].reshape(-1, 2)
    nodes = grid.nodes()[1:-1, 1:-1].reshape(-1, 2)
    dist, _ = distance_to_polyline(curve.points, nodes)
    tube = dist <= tube_width
    if np.count_nonzero(tube) < 2:
        raise ConfigurationError("tube contains fewer than two grid nodes")
    pts, grads = nodes[tube], grad_nodes[tube]
    if len(pts) > max_nodes:
        pick = np.random.default_rng(seed).choice(len(pts), size=max_nodes, replace=False)
        pts, grads = pts[pick], grads[pick]
    g_inf = float(np.min(np.linalg.norm(grid.gradient(curve.points), axis=1)))
    if g_inf < 1e-10:
        raise DegenerateDefiningFunctionError("|grad Phi| vanishes on the boundary")
    return holder_seminorm(pts, grads, gamma) / g_inf


@dataclass(frozen=True)
class GraphRadius:
    delta: float
    r0: float


def graph_radius(q: float, gamma: float) -> GraphRadius:
    """Radius ``delta`` with ``delta^gamma q = 1/2`` and ``r0 = delta / 6``."""
    if q <= 0:
        raise ConfigurationError("q must be > 0")
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    delta = (1.0 / (2.0 * q)) ** (1.0 / gamma)
    return GraphRadius(delta=delta, r0=delta / 6.0)


def max_graph_slope(curve: MarkerCurve, delta: float) -> float:
    """Largest ``|dy_normal / dy_tangent|`` over marker pairs within ``delta`` of a base marker,
    measured in the tangent frame of the base marker."""
    p = curve.points
    t = unit_tangents(curve)
    nrm = np.column_stack([t[:, 1], -t[:, 0]])
    worst = 0.0
    for i in range(len(p)):
        near = p[np.linalg.norm(p - p[i], axis=1) < delta]
        if len(near) < 2:
            continue
        along = (near - p[i]) @ t[i]
        across = (near - p[i]) @ nrm[i]
        da = along[:, None] - along[None, :]
        dc = across[:, None] - across[None, :]
        mask = np.abs(da) > 0
        if np.any(mask):
            worst = max(worst, float(np.max(np.abs(dc[mask]) / np.abs(da[mask]))))
    return worst
