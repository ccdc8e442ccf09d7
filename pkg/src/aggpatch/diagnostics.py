"""Per-step diagnostics rows."""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import PatchError
from .geometry import bilipschitz_lower, metrics, segment_lengths, smooth_moments, tangent_holder_diagnostic

COLUMNS = (
    "s", "t", "area", "area_ratio_error", "cx", "cy", "mu", "q", "sup_gradv",
    "log_bound_ratio", "tangent_holder", "min_spacing", "max_spacing",
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    s: float
    t: float
    area: float
    area_ratio_error: float
    cx: float
    cy: float
    mu: float = math.nan
    q: float = math.nan
    sup_gradv: float = math.nan
    log_bound_ratio: float = math.nan
    tangent_holder: float = math.nan
    min_spacing: float = math.nan
    max_spacing: float = math.nan

    def as_row(self) -> tuple:
        return astuple(self)

    @classmethod
    def from_row(cls, row) -> "DiagnosticsRecord":
        return cls(*(float(v) for v in row))


assert tuple(f.name for f in fields(DiagnosticsRecord)) == COLUMNS


def cheap_record(state) -> DiagnosticsRecord:
    """Moments and spacings only; the expensive columns are NaN."""
    p = state.curve.points
    area, c = smooth_moments(p)
    seg = segment_lengths(p)
    return DiagnosticsRecord(
        s=state.s,
        t=state.t,
        area=area,
        area_ratio_error=abs(area / state.area0 - math.exp(-state.s)),
        cx=float(c[0]),
        cy=float(c[1]),
        min_spacing=float(seg.min()),
        max_spacing=float(seg.max()),
    )


def full_record(state, gamma: float = 0.5, c_cal: float = 1.0, grid=None, grid_n: int = 96,
                seed: int = 0, q_max_nodes: int = 2000, compute_q: bool = True) -> DiagnosticsRecord:
    """Every column, including q, the sampled sup |grad v| and the log-bound ratio.

    Without an explicit ``grid`` the defining function is the signed distance
    to the current curve; ``compute_q=False`` leaves q (and the ratio) NaN.
    """
    from .field import log_bound_rhs, sample_sup_grad_velocity
    from .levelset import q_of_domain, signed_distance_grid

    base = cheap_record(state)
    curve = state.curve
    m = metrics(curve)
    mu = math.nan
    if state.labels is not None and len(state.labels) == curve.n:
        mu = bilipschitz_lower(np.asarray(state.labels), curve.points)
    q = math.nan
    if compute_q:
        if grid is None:
            grid = signed_distance_grid(curve, n=grid_n, margin=0.25, s=state.s)
        tube = max(4.0 * grid.spacing, 0.1 * m.diameter)
        try:
            q = q_of_domain(grid, curve, gamma, tube, max_nodes=q_max_nodes, seed=seed)
        except PatchError:  # partial report: q unavailable
            pass
    sup = sample_sup_grad_velocity(curve)
    ratio = math.nan
    if math.isfinite(q) and q > 0 and math.isfinite(sup):
        ratio = sup / log_bound_rhs(q, base.area, gamma, c_cal)
    return DiagnosticsRecord(
        s=base.s, t=base.t, area=base.area, area_ratio_error=base.area_ratio_error,
        cx=base.cx, cy=base.cy, mu=mu, q=q, sup_gradv=sup, log_bound_ratio=ratio,
        tangent_holder=tangent_holder_diagnostic(curve, gamma),
        min_spacing=base.min_spacing, max_spacing=base.max_spacing,
    )
