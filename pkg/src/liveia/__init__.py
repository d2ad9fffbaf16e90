"""LIVEIA: a deterministic geometric-optics engine and scenario studio.

Psyche spheres with optical attributes, thought beams with waveform and
divergence semantics, trace-based depictions of reflection, deception,
shadow and enlightenment, and branchable scenario timelines.
"""

from .geometry import Ray, Vec3
from .optics import (
    Beam,
    Fracture,
    InterfaceEvent,
    MirrorMode,
    RefractMode,
    ScatterMode,
    ShellGeometry,
    TraceLimits,
    TraceTree,
    WaveComponent,
    attenuate,
    bundle_divergence,
    critical_angle,
    fresnel_unpolarized,
    intersect_fracture,
    intersect_shell,
    reflect,
    refract,
    trace_beam,
)

__version__ = "0.1.0"

__all__ = [
    "Beam",
    "Fracture",
    "InterfaceEvent",
    "MirrorMode",
    "Ray",
    "RefractMode",
    "ScatterMode",
    "ShellGeometry",
    "TraceLimits",
    "TraceTree",
    "Vec3",
    "WaveComponent",
    "attenuate",
    "bundle_divergence",
    "critical_angle",
    "fresnel_unpolarized",
    "intersect_fracture",
    "intersect_shell",
    "reflect",
    "refract",
    "trace_beam",
    "__version__",
]
