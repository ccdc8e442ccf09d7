"""Newtonian potential, its gradient and the principal-value Hessian kernels.

All functions accept a single point of shape ``(d,)`` or a batch of shape
``(..., d)`` and are pure.  Indices ``j, k`` are zero based.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma as _gamma_fn, pi
from typing import Callable

import numpy as np

from .errors import ConfigurationError, SingularEvaluationError

SUPPORTED_DIMENSIONS = (2, 3)


@dataclass(frozen=True)
class KernelSpec:
    """Spatial dimension together with the unit-sphere measure ``omega``."""

    d: int = 2

    def __post_init__(self):
        if self.d not in SUPPORTED_DIMENSIONS:
            raise ConfigurationError(
                f"dimension d={self.d} unsupported; expected one of {SUPPORTED_DIMENSIONS}"
            )

    @property
    def omega(self) -> float:
        # surface measure of S^{d-1}: 2 pi^{d/2} / Gamma(d/2)
        return 2.0 * pi ** (self.d / 2.0) / _gamma_fn(self.d / 2.0)

    @property
    def logarithmic(self) -> bool:
        return self.d == 2


def _as_points(spec: KernelSpec, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != spec.d:
        raise ConfigurationError(f"points must have trailing dimension {spec.d}, got {y.shape}")
    return y


def _norm_checked(y: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(y, axis=-1)
    if np.any(r == 0.0):
        raise SingularEvaluationError("kernel evaluated at the origin")
    return r


def newtonian_potential(spec: KernelSpec, y):
    """Fundamental solution of the Laplacian, ``N(y)``."""
    y = _as_points(spec, y)
    r = _norm_checked(y)
    if spec.logarithmic:
        return np.log(r) / (2.0 * pi)
    return -1.0 / ((spec.d - 2) * spec.omega * r ** (spec.d - 2))


def grad_newtonian(spec: KernelSpec, y):
    """Gradient ``y / (omega |y|^d)`` of :func:`newtonian_potential`."""
    y = _as_points(spec, y)
    r = _norm_checked(y)
    return y / (spec.omega * r[..., None] ** spec.d)


def pv_hessian_component(spec: KernelSpec, j: int, k: int, x):
    """Pointwise value of the even, zero-mean kernels behind ``grad v``.

    For ``j != k`` this is ``d x_j x_k / (omega |x|^{d+2})``, the kernel whose
    truncated convolution with the patch gives ``dv_j/dx_k``.  For ``j == k``
    it is ``(|x|^2 - d x_j^2) / (omega |x|^{d+2})``, which enters
    ``dv_j/dx_j`` with a minus sign next to the ``-chi_D/d`` term.  The delta
    contribution is left to callers.
    """
    x = _as_points(spec, x)
    d = spec.d
    if not (0 <= j < d and 0 <= k < d):
        raise ConfigurationError(f"indices ({j}, {k}) out of range for d={d}")
    r = _norm_checked(x)
    r2 = r * r
    denom = spec.omega * r ** (d + 2)
    if j != k:
        lo, hi = sorted((j, k))  # fixed order keeps the kernel exactly symmetric
        return d * (x[..., lo] * x[..., hi]) / denom
    return (r2 - d * x[..., j] ** 2) / denom


def hessian_angular_part(spec: KernelSpec, j: int, k: int) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``Omega`` with ``pv_hessian_component(j, k, x) = Omega(x) / |x|^d``."""

    def omega_fn(u):
        u = np.asarray(u, dtype=float)
        r = np.linalg.norm(u, axis=-1)
        return pv_hessian_component(spec, j, k, u) * r ** spec.d

    return omega_fn


def hemisphere_integral(spec: KernelSpec, omega_fn, normal_axis: int, resolution: int) -> float:
    """Integrate ``omega_fn`` over ``{x in S^{d-1} : x[normal_axis] < 0}``.

    Equispaced midpoint nodes in 2-D; in 3-D a product rule with Gauss-Legendre
    nodes in the polar cosine (polar axis = ``normal_axis``) and equispaced
    azimuths.
    """
    if resolution < 16:
        raise ConfigurationError("resolution must be >= 16")
    d = spec.d
    if not 0 <= normal_axis < d:
        raise ConfigurationError(f"normal_axis {normal_axis} out of range for d={d}")

    if d == 2:
        # angle measured so that the hemisphere is theta in (pi, 2 pi) when normal_axis=1
        theta = pi + (np.arange(resolution) + 0.5) * pi / resolution
        pts = np.empty((resolution, 2))
        other = 1 - normal_axis
        pts[:, other] = np.cos(theta)
        pts[:, normal_axis] = np.sin(theta)
        return float(np.sum(omega_fn(pts)) * pi / resolution)

    c, wc = np.polynomial.legendre.leggauss(resolution)
    c = 0.5 * (c - 1.0)  # map to (-1, 0)
    wc = 0.5 * wc
    phi = (np.arange(2 * resolution) + 0.5) * pi / resolution
    sin_t = np.sqrt(1.0 - c * c)
    axes = [a for a in range(3) if a != normal_axis]
    total = 0.0
    chunk = max(1, 2_000_000 // (2 * resolution))
    for lo in range(0, resolution, chunk):
        sl = slice(lo, lo + chunk)
        n = len(c[sl])
        pts = np.empty((n, 2 * resolution, 3))
        pts[..., normal_axis] = c[sl, None]
        pts[..., axes[0]] = sin_t[sl, None] * np.cos(phi)[None, :]
        pts[..., axes[1]] = sin_t[sl, None] * np.sin(phi)[None, :]
        total += float(np.sum(wc[sl, None] * omega_fn(pts)))
    return total * pi / resolution
