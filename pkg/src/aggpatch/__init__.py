"""Contour dynamics and diagnostics for aggregation patches of the Newtonian aggregation equation."""

from .contour import PatchState, StepperConfig, boundary_velocity, rk4_step, run, velocity_field_on_markers
from .diagnostics import DiagnosticsRecord
from .geometry import MarkerCurve, metrics, redistribute
from .kernels import KernelSpec

__all__ = [
    "DiagnosticsRecord",
    "KernelSpec",
    "MarkerCurve",
    "PatchState",
    "StepperConfig",
    "boundary_velocity",
    "metrics",
    "redistribute",
    "rk4_step",
    "run",
    "velocity_field_on_markers",
]

__version__ = "0.1.0"
