"""Closed-form reference solutions used as oracles.

Formulas are written in original time ``t`` (density ``1/(1-t)`` on the
patch); converters handle the rescaled time ``s = log(1/(1-t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalError


def s_to_t(s: float) -> float:
    return -math.expm1(-s)


def t_to_s(t: float) -> float:
    if t >= 1.0:
        raise ConfigurationError("t must be < 1")
    return -math.log1p(-t)


@dataclass(frozen=True)
class DiscSolution:
    r0: float = 1.0
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.r0 > 0:
            raise ConfigurationError("r0 must be > 0")

    @property
    def c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=float)


def disc_radius(sol: DiscSolution, s: float) -> float:
    return sol.r0 * math.exp(-0.5 * s)


def _check_t(t: float) -> None:
    if not t < 1.0:
        raise ConfigurationError("t must be < 1")


def disc_velocity(sol: DiscSolution, x, t: float) -> np.ndarray:
    """Original-time velocity of the collapsing disc (continuous across the edge)."""
    _check_t(t)
    y = np.asarray(x, dtype=float) - sol.c
    r2 = np.sum(y * y, axis=-1)
    radius2 = sol.r0 ** 2 * (1.0 - t)
    inner = -y / (2.0 * (1.0 - t))
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = -sol.r0 ** 2 * y / (2.0 * r2[..., None])
    return np.where((r2 < radius2)[..., None], inner, outer)


def disc_inverse_flow(sol: DiscSolution, x, t: float) -> np.ndarray:
    """Initial position of the particle found at ``x`` at original time ``t``."""
    _check_t(t)
    y = np.asarray(x, dtype=float) - sol.c
    r2 = np.sum(y * y, axis=-1)
    radius2 = sol.r0 ** 2 * (1.0 - t)
    inner = y / math.sqrt(1.0 - t)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = np.sqrt(r2 + sol.r0 ** 2 * t)[..., None] * y / np.sqrt(r2)[..., None]
    return sol.c + np.where((r2 < radius2)[..., None], inner, outer)


def disc_forward_flow(sol: DiscSolution, alpha, t: float) -> np.ndarray:
    """Position at time ``t`` of the particle starting at ``alpha``."""
    _check_t(t)
    y = np.asarray(alpha, dtype=float) - sol.c
    r2 = np.sum(y * y, axis=-1)
    inner = y * math.sqrt(1.0 - t)
    with np.errstate(divide="ignore", invalid="ignore"):
        outer = np.sqrt(np.maximum(r2 - sol.r0 ** 2 * t, 0.0))[..., None] * y / np.sqrt(r2)[..., None]
    return sol.c + np.where((r2 < sol.r0 ** 2)[..., None], inner, outer)


def disc_defining_function(sol: DiscSolution, x, t: float, corrected: bool = True) -> np.ndarray:
    """Transported ``|x|^2 - r0^2``; the corrected version carries ``(1-t)`` inside."""
    _check_t(t)
    y = np.asarray(x, dtype=float) - sol.c
    r2 = np.sum(y * y, axis=-1)
    radius2 = sol.r0 ** 2 * (1.0 - t)
    phi = np.where(r2 < radius2, (r2 - radius2) / (1.0 - t), r2 - radius2)
    if corrected:
        phi = np.where(r2 < radius2, (1.0 - t) * phi, phi)
    return phi


def ball_radius(d: int, r0: float, t: float) -> float:
    if d not in (2, 3):
        raise ConfigurationError("d must be 2 or 3")
    _check_t(t)
    return r0 * (1.0 - t) ** (1.0 / d)


def disc_boundary(sol: DiscSolution, s: float, n: int) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(n) / n
    r = disc_radius(sol, s)
    return sol.c + r * np.column_stack([np.cos(theta), np.sin(theta)])


@dataclass(frozen=True)
class EllipseSolution:
    a: float = 2.0
    b: float = 1.0
    center: tuple = (0.0, 0.0)
    collapsed: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (self.a >= self.b > 0):
            raise ConfigurationError("need a >= b > 0")


def _axes_rate(a: float, b: float) -> float:
    # both semi-axes shrink at -ab/(a+b): interior field is (-b x, -a y)/(a+b)
    return -a * b / (a + b)


def ellipse_interior_velocity(sol: EllipseSolution, x) -> np.ndarray:
    y = np.asarray(x, dtype=float) - np.asarray(sol.center, dtype=float)
    s = sol.a + sol.b
    return np.stack([-sol.b * y[..., 0] / s, -sol.a * y[..., 1] / s], axis=-1)


def ellipse_axes_step(sol: EllipseSolution, ds: float) -> EllipseSolution:
    """One RK4 step of ``da/ds = db/ds = -ab/(a+b)``; ``a - b`` is conserved."""
    a, b = sol.a, sol.b

    def f(a_, b_):
        r = _axes_rate(a_, b_)
        return r, r

    k1 = f(a, b)
    k2 = f(a + 0.5 * ds * k1[0], b + 0.5 * ds * k1[1])
    k3 = f(a + 0.5 * ds * k2[0], b + 0.5 * ds * k2[1])
    k4 = f(a + ds * k3[0], b + ds * k3[1])
    inc = ds / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    a1, b1 = a + inc, b + inc
    if not (math.isfinite(a1) and math.isfinite(b1)):
        raise NumericalError("non-finite ellipse axes")
    if b1 <= 0:
        raise NumericalError("collapse complete: minor semi-axis reached zero")
    return EllipseSolution(a=a1, b=b1, center=sol.center)


def ellipse_axes_at(sol: EllipseSolution, s: float, ds: float = 1e-3) -> EllipseSolution:
    """Integrate the axes ODE from 0 to ``s`` (either direction)."""
    n = max(1, int(math.ceil(abs(s) / ds)))
    h = s / n
    for _ in range(n):
        sol = ellipse_axes_step(sol, h)
    return sol


def ellipse_boundary(sol: EllipseSolution, n: int) -> np.ndarray:
    theta = 2.0 * math.pi * np.arange(n) / n
    return np.asarray(sol.center, float) + np.column_stack([sol.a * np.cos(theta), sol.b * np.sin(theta)])


def fit_ellipse(points) -> tuple[np.ndarray, float, float, float]:
    """Least-squares conic fit; returns ``(center, a, b, angle)`` with ``a >= b``."""
    p = np.asarray(points, dtype=float)
    shift = p.mean(axis=0)
    x, y = (p - shift).T
    design = np.column_stack([x * x, x * y, y * y, x, y])
    coef, *_ = np.linalg.lstsq(design, np.ones(len(p)), rcond=None)
    A, B, C, D, E = coef
    M = np.array([[A, B / 2], [B / 2, C]])
    c = np.linalg.solve(2 * M, -np.array([D, E]))
    k = 1.0 + c @ M @ c  # value of the quadratic form at the centre shift
    evals, evecs = np.linalg.eigh(M / k)
    if np.any(evals <= 0):
        raise ConfigurationError("points are not fitted by an ellipse")
    axes = 1.0 / np.sqrt(evals)
    order = np.argsort(axes)[::-1]
    a, b = axes[order]
    major = evecs[:, order[0]]
    return c + shift, float(a), float(b), float(math.atan2(major[1], major[0]))


def fourier_boundary(r0: float, modes, n: int, center=(0.0, 0.0)) -> np.ndarray:
    """``r(theta) = r0 (1 + sum A_k cos(k theta + phase_k))`` sampled at ``n`` angles."""
    theta = 2.0 * math.pi * np.arange(n) / n
    r = np.ones(n)
    for k, amp, phase in modes:
        r += amp * np.cos(k * theta + phase)
    r *= r0
    return np.asarray(center, float) + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
