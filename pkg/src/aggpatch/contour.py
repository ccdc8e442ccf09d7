"""Contour dynamics of aggregation patches in rescaled time.

The boundary velocity is the single-layer form
``v(x) = int_{dD} N(x - y) n(y) dsigma(y)`` with ``N = log|.|/(2 pi)``,
integrated in the marker parameter.  Writing the kernel as
``log|2 sin((theta - theta_i)/2)| + smooth`` and correcting the punctured
trapezoid rule at the singular node gives

    v_i = (1/2pi) [ sum_{j != i} log|X_i - X_j| g_j + log(|X'_i| / 2pi) g_i ],

with ``g_j = (Y'_j, -X'_j)`` the rotated index derivative.  The error is
third order in the marker spacing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .diagnostics import DiagnosticsRecord, cheap_record
from .errors import ConfigurationError, GeometryError, NumericalError, TopologyError
from .geometry import MarkerCurve, periodic_derivative, resample, segment_lengths, self_intersects, smooth_moments

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


def marker_velocities(points: np.ndarray) -> np.ndarray:
    """Velocity at every marker of a raw ``(N, 2)`` marker array."""
    p = np.asarray(points, dtype=float)
    n = len(p)
    d = periodic_derivative(p)
    g = np.column_stack([d[:, 1], -d[:, 0]])
    speed = np.hypot(d[:, 0], d[:, 1])
    x, y = p[:, 0], p[:, 1]
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    r2 = dx * dx + dy * dy
    idx = np.arange(n)
    r2[idx, idx] = 1.0
    with np.errstate(divide="ignore"):
        kernel = 0.5 * np.log(r2)
    kernel[idx, idx] = np.log(speed / TWO_PI)
    v = kernel @ g / TWO_PI
    if not np.all(np.isfinite(v)):
        raise NumericalError("non-finite boundary velocity")
    return v


def _check_spacing(curve: MarkerCurve) -> None:
    p = curve.points
    span = float(np.max(np.ptp(p, axis=0)))
    if np.min(segment_lengths(p)) < 1e-12 * span:
        raise GeometryError("marker spacing below 1e-12 * diameter")


def boundary_velocity(curve: MarkerCurve, i: int) -> np.ndarray:
    """Velocity of marker ``i`` (rescaled time, patch density 1)."""
    _check_spacing(curve)
    p = curve.points
    n = len(p)
    i = i % n
    d = periodic_derivative(p)
    g = np.column_stack([d[:, 1], -d[:, 0]])
    r = np.hypot(*(p[i] - p).T)
    r[i] = 1.0
    w = np.log(r)
    w[i] = math.log(math.hypot(*d[i]) / TWO_PI)
    return w @ g / TWO_PI


def velocity_field_on_markers(curve: MarkerCurve) -> np.ndarray:
    _check_spacing(curve)
    return marker_velocities(curve.points)


@dataclass(frozen=True, eq=False)
class PatchState:
    """Boundary markers at rescaled time ``s``.

    ``labels`` are the initial positions of the markers (Lagrangian
    coordinates on the initial boundary); redistribution interpolates them.
    ``generation`` counts redistributions, so two states with equal
    generation have corresponding markers.
    """

    curve: MarkerCurve
    s: float = 0.0
    area0: float = math.nan
    labels: Optional[np.ndarray] = None
    generation: int = 0
    step: int = 0
    blown_up: bool = False

    def __post_init__(self):
        if math.isnan(self.area0):
            object.__setattr__(self, "area0", smooth_moments(self.curve.points)[0])
        if self.labels is None:
            object.__setattr__(self, "labels", self.curve.points.copy())

    @classmethod
    def initial(cls, curve: MarkerCurve, s: float = 0.0) -> "PatchState":
        return cls(curve=curve, s=s)

    @property
    def t(self) -> float:
        return -math.expm1(-self.s)

    @property
    def density(self) -> float:
        """Density of the patch in original time, ``1/(1 - t)``."""
        return math.exp(self.s)


@dataclass(frozen=True)
class StepperConfig:
    ds: float = 1e-3
    redistribute_every: int = 0
    n_markers: Optional[int] = None
    spacing_ratio_trigger: float = 2.0
    scheme: str = field(default="rk4", init=False)

    def __post_init__(self):
        if not self.ds > 0:
            raise ConfigurationError("ds must be > 0")
        if self.ds > 0.1:
            raise ConfigurationError("ds must be <= 0.1")
        if self.redistribute_every < 0:
            raise ConfigurationError("redistribute_every must be >= 0")
        if self.n_markers is not None and self.n_markers < 8:
            raise ConfigurationError("n_markers ≥ 8")


def _needs_redistribution(curve: MarkerCurve, step: int, cfg: StepperConfig) -> bool:
    if cfg.redistribute_every and step % cfg.redistribute_every == 0:
        return True
    if cfg.n_markers is not None and cfg.n_markers != curve.n:
        return True
    seg = segment_lengths(curve.points)
    return float(seg.max() / seg.min()) > cfg.spacing_ratio_trigger


def rk4_step(state: PatchState, cfg: StepperConfig, h: Optional[float] = None) -> PatchState:
    """Advance every marker by one classical Runge-Kutta step of size ``h``.

    ``h`` defaults to ``cfg.ds`` and may be negative (backward in time).
    Stage curves are never redistributed; redistribution, when due, happens
    after the full step.
    """
    h = cfg.ds if h is None else float(h)
    if h == 0.0:
        return state
    x0 = state.curve.points
    k1 = marker_velocities(x0)
    k2 = marker_velocities(x0 + 0.5 * h * k1)
    k3 = marker_velocities(x0 + 0.5 * h * k2)
    k4 = marker_velocities(x0 + h * k3)
    x1 = x0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x1)):
        raise NumericalError("non-finite marker positions")
    try:
        curve = MarkerCurve(x1)
    except GeometryError as exc:
        raise TopologyError(f"step produced an invalid curve: {exc}") from exc
    if self_intersects(curve):
        raise TopologyError("boundary self-intersects")

    step = state.step + 1
    labels, generation = state.labels, state.generation
    if _needs_redistribution(curve, step, cfg):
        curve, labels = resample(curve, cfg.n_markers or curve.n, carried=labels)
        generation += 1
    return replace(state, curve=curve, s=state.s + h, labels=labels, generation=generation, step=step)


Observer = Callable[[PatchState, DiagnosticsRecord], None]


def run(state0: PatchState, cfg: StepperConfig, s_end: float, observer: Optional[Observer] = None) -> PatchState:
    """Iterate :func:`rk4_step` until ``s_end`` (forward or backward).

    The final step is shortened to land on ``s_end`` exactly.  On a topology
    error the last valid state is returned with ``blown_up=True``.
    """
    direction = 1.0 if s_end >= state0.s else -1.0
    state = state0
    tol = 1e-12 * max(1.0, abs(s_end))
    while direction * (s_end - state.s) > tol:
        h = direction * min(cfg.ds, abs(s_end - state.s))
        try:
            nxt = rk4_step(state, cfg, h)
        except TopologyError as exc:
            log.warning("blow-up detected at s=%.6g: %s", state.s, exc)
            return replace(state, blown_up=True)
        if abs(s_end - nxt.s) <= tol:
            nxt = replace(nxt, s=float(s_end))
        state = nxt
        if observer is not None:
            observer(state, cheap_record(state))
    return state
