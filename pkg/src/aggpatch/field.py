"""Eulerian evaluation of the velocity ``v = -grad N * chi_D`` and its gradient.

Three independent evaluators live here:

* ``velocity_at`` / ``grad_velocity_at``: trapezoid rule on the single-layer
  boundary form (smooth integrand away from the boundary).
* ``velocity_field``: a Cauchy-integral form, accurate up to and on the
  boundary, used for trajectory tracing.  With ``z = x + i y``,
  ``conj(v) = -(conj(z) chi_D(z) - C(z)) / 2`` where ``C`` is the Cauchy
  integral of ``conj(w)`` over the boundary; ``C`` is evaluated from its
  boundary limits with the barycentric (interior/exterior) formulas.
* ``grad_velocity_pv_oracle``: area quadrature of the truncated
  principal-value kernels in polar coordinates about the query point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NearBoundaryError
from .geometry import (
    MarkerCurve,
    contains,
    distance_to_polyline,
    metrics,
    periodic_derivative,
    segment_lengths,
    winding_numbers,
)
from .kernels import KernelSpec, hessian_angular_part

TWO_PI = 2.0 * math.pi
NEAR_BOUNDARY_FRACTION = 1e-3


@dataclass(frozen=True)
class FieldSample:
    x: np.ndarray
    v: np.ndarray
    grad_v: np.ndarray
    side: str
    eps: float


def _fft_upsample(points: np.ndarray, factor: int) -> np.ndarray:
    """Trigonometric interpolation of periodic markers onto ``factor`` times more nodes."""
    if factor <= 1:
        return points
    n = len(points)
    z = points[:, 0] + 1j * points[:, 1]
    zh = np.fft.fft(z)
    m = n * factor
    out = np.zeros(m, dtype=complex)
    half = n // 2
    out[:half] = zh[:half]
    out[m - (n - half):] = zh[half:]
    if n % 2 == 0:
        # split the Nyquist mode symmetrically
        out[half] = 0.5 * zh[half]
        out[m - half] = 0.5 * zh[half]
    zf = np.fft.ifft(out) * factor
    return np.column_stack([zf.real, zf.imag])


def _prepare_queries(curve: MarkerCurve, x, check_near: bool = True):
    q = np.atleast_2d(np.asarray(x, dtype=float))
    dist, _ = distance_to_polyline(curve.points, q)
    p = curve.points
    span = float(np.max(np.ptp(p, axis=0)))
    if check_near and np.any(dist < NEAR_BOUNDARY_FRACTION * span):
        raise NearBoundaryError("query point within 1e-3 * diameter of the boundary")
    return q, dist


def _auto_factor(curve: MarkerCurve, dist: np.ndarray) -> int:
    h = float(np.max(segment_lengths(curve.points)))
    need = 4.0 * h / max(float(np.min(dist)), 1e-300)
    if need <= 1.0:
        return 1
    return int(min(64, 2 ** math.ceil(math.log2(need))))


def _boundary_nodes(curve: MarkerCurve, dist, upsample):
    factor = _auto_factor(curve, dist) if upsample == "auto" else int(upsample)
    p = _fft_upsample(curve.points, factor)
    d = periodic_derivative(p)
    return p, np.column_stack([d[:, 1], -d[:, 0]])


def velocity_at(curve: MarkerCurve, x, upsample="auto") -> np.ndarray:
    """``int_{dD} N(x - y) n(y) dsigma(y)`` by the trapezoid rule.

    ``upsample="auto"`` refines the boundary by trigonometric interpolation
    when the query is within a few marker spacings of the curve.
    """
    single = np.ndim(x) == 1
    q, dist = _prepare_queries(curve, x)
    p, g = _boundary_nodes(curve, dist, upsample)
    out = np.empty((len(q), 2))
    for lo in range(0, len(q), 2048):
        diff = q[lo:lo + 2048, None, :] - p[None, :, :]
        out[lo:lo + 2048] = np.log(np.hypot(diff[..., 0], diff[..., 1])) @ g / TWO_PI
    return out[0] if single else out


def grad_velocity_at(curve: MarkerCurve, x, upsample="auto") -> np.ndarray:
    """Matrix ``G[j, k] = dv_j/dx_k`` from the differentiated single layer."""
    single = np.ndim(x) == 1
    q, dist = _prepare_queries(curve, x)
    p, g = _boundary_nodes(curve, dist, upsample)
    out = np.empty((len(q), 2, 2))
    for lo in range(0, len(q), 2048):
        diff = q[lo:lo + 2048, None, :] - p[None, :, :]
        r2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
        gk = diff / r2[..., None] / TWO_PI  # d_k N(x - y)
        out[lo:lo + 2048] = np.einsum("mnk,nj->mjk", gk, g)
    return out[0] if single else out


def _cauchy_boundary_limits(w: np.ndarray, dw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Interior and exterior boundary limits of the Cauchy integral of ``conj(w)``."""
    n = len(w)
    tau = np.conj(w)
    diff = w[None, :] - w[:, None]
    idx = np.arange(n)
    diff[idx, idx] = 1.0
    terms = (tau[None, :] - tau[:, None]) * dw[None, :] / diff
    terms[idx, idx] = np.conj(dw)
    c_minus = terms.sum(axis=1) / (2j * math.pi)
    return c_minus + tau, c_minus


def velocity_field(curve: MarkerCurve, x) -> np.ndarray:
    """Velocity at arbitrary points, accurate arbitrarily close to the boundary.

    Points on the boundary receive the (continuous) boundary value.
    """
    single = np.ndim(x) == 1
    q = np.atleast_2d(np.asarray(x, dtype=float))
    p = curve.points
    w = p[:, 0] + 1j * p[:, 1]
    d = periodic_derivative(p)
    dw = d[:, 0] + 1j * d[:, 1]
    c_plus, c_minus = _cauchy_boundary_limits(w, dw)
    inside = winding_numbers(p, q) != 0
    span = float(np.max(np.ptp(p, axis=0)))
    out = np.empty((len(q), 2))
    for lo in range(0, len(q), 4096):
        z = q[lo:lo + 4096, 0] + 1j * q[lo:lo + 4096, 1]
        ins = inside[lo:lo + 4096]
        diff = w[None, :] - z[:, None]
        hit = np.abs(diff) <= 1e-14 * span
        diff[hit] = 1.0
        kern = dw[None, :] / diff
        base = kern.sum(axis=1)
        num_in = kern @ c_plus
        num_out = kern @ c_minus
        with np.errstate(divide="ignore", invalid="ignore"):
            cz = np.where(ins, num_in / base, num_out / (base - 2j * math.pi))
        vbar = np.where(ins, -0.5 * (np.conj(z) - cz), 0.5 * cz)
        rows, cols = np.nonzero(hit)
        vbar[rows] = 0.5 * c_minus[cols]
        out[lo:lo + 4096, 0] = vbar.real
        out[lo:lo + 4096, 1] = -vbar.imag
    return out[0] if single else out


def _ray_intervals(points: np.ndarray, x: np.ndarray, directions: np.ndarray, inside: bool, eps: float):
    """Sum over rays of ``log(r_b / r_a)`` for the parts of each ray inside D beyond ``eps``."""
    a = points
    ab = np.roll(points, -1, 0) - points
    ax = a - x
    ex, ey = directions[:, 0][:, None], directions[:, 1][:, None]
    denom = ex * ab[None, :, 1] - ey * ab[None, :, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = (ax[None, :, 0] * ab[None, :, 1] - ax[None, :, 1] * ab[None, :, 0]) / denom
        t = (ax[None, :, 0] * ey - ax[None, :, 1] * ex) / denom
    valid = (denom != 0) & (t >= 0) & (t < 1) & (r > 0)
    r = np.where(valid, r, np.inf)
    r.sort(axis=1)
    total = np.zeros(len(directions))
    count = valid.sum(axis=1)
    for m in range(len(directions)):
        rs = r[m, :count[m]]
        edges = np.concatenate([[0.0], rs]) if inside else rs
        for lo_r, hi_r in zip(edges[0::2], edges[1::2]):
            lo_r = max(lo_r, eps)
            if hi_r > lo_r:
                total[m] += math.log(hi_r / lo_r)
    return total


def grad_velocity_pv_oracle(curve: MarkerCurve, x, subgrid: int = 1000) -> np.ndarray:
    """Independent ``dv_j/dx_k`` from truncated principal-value area integrals.

    Integrates the even kernels over ``D minus B(x, eps)``, ``eps`` the
    distance to the boundary, in polar coordinates about ``x``: along each of
    ``subgrid`` rays the radial integral of ``Omega/r^2 * r dr`` is
    ``Omega * log(r_b / r_a)`` per chord inside the patch.
    """
    if subgrid < 500:
        raise ConfigurationError("subgrid must be >= 500")
    x = np.asarray(x, dtype=float)
    p = curve.points
    eps = float(distance_to_polyline(p, x[None])[0][0])
    if eps <= 0.0:
        raise NearBoundaryError("oracle requires an off-boundary point")
    inside = bool(contains(curve, x[None])[0])
    phi = (np.arange(subgrid) + 0.5) * TWO_PI / subgrid
    e = np.column_stack([np.cos(phi), np.sin(phi)])
    radial = _ray_intervals(p, x, e, inside, eps)
    spec = KernelSpec(2)
    dphi = TWO_PI / subgrid
    grad = np.empty((2, 2))
    for j in range(2):
        for k in range(2):
            integral = float(np.sum(hessian_angular_part(spec, j, k)(e) * radial) * dphi)
            if j == k:
                grad[j, k] = -(1.0 if inside else 0.0) / spec.d - integral
            else:
                grad[j, k] = integral
    return grad


def log_bound_rhs(q: float, volume: float, gamma: float, c_cal: float = 1.0, d: int = 2) -> float:
    """``(c_cal/gamma) * (1 + log+(volume^(1/d) * q))``."""
    if q <= 0 or volume <= 0 or c_cal <= 0:
        raise ConfigurationError("q, volume and c_cal must be positive")
    if not 0.0 < gamma < 1.0:
        raise ConfigurationError("gamma must lie in (0, 1)")
    return (c_cal / gamma) * (1.0 + max(math.log(volume ** (1.0 / d) * q), 0.0))


def sample(curve: MarkerCurve, x) -> FieldSample:
    x = np.asarray(x, dtype=float)
    eps = float(distance_to_polyline(curve.points, x[None])[0][0])
    inside = bool(contains(curve, x[None])[0])
    return FieldSample(
        x=x,
        v=velocity_at(curve, x),
        grad_v=grad_velocity_at(curve, x),
        side="inside" if inside else "outside",
        eps=eps,
    )


def sample_sup_grad_velocity(curve: MarkerCurve, n_rays: int = 32) -> float:
    """Max operator norm of ``grad v`` over a deterministic probe set.

    Probes sit on rays from the centroid through evenly chosen markers at
    fractions 0, .25, .5, .75, .9 (inside) and 1.1, 1.5 (outside) of the
    marker distance; probes too close to the boundary are dropped.
    """
    m = metrics(curve)
    c = m.smooth_centroid
    p = curve.points
    pick = p[np.linspace(0, len(p), n_rays, endpoint=False).astype(int)]
    fr = np.array([0.0, 0.25, 0.5, 0.75, 0.9, 1.1, 1.5])
    probes = (c[None, None, :] + fr[None, :, None] * (pick - c)[:, None, :]).reshape(-1, 2)
    probes = np.unique(probes, axis=0)
    dist, _ = distance_to_polyline(p, probes)
    probes = probes[dist > 0.02 * m.diameter]
    if len(probes) == 0:
        return math.nan
    grads = grad_velocity_at(curve, probes)
    return float(np.max(np.linalg.norm(grads, ord=2, axis=(1, 2))))
