"""Deterministic geometric-optics kernel.

Interface physics (Snell refraction, mirror reflection, unpolarized Fresnel
splits), sphere-shell and fracture-disc intersection, recursive beam tracing
with per-branch intensity bookkeeping, and marginal-ray divergence tracking.

Spheres are glassy shells: the shell band carries the refractive index and
opacity, while the hollow core and the exterior are air (index 1). Every
operation is a pure function of its inputs; two traces of identical inputs
produce bit-identical trees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Literal, Optional, Sequence, Union

from .errors import GeometryConflict, InvalidArgument
from .geometry import (
    Ray,
    Vec3,
    angle_between,
    perpendicular_to,
    require_unit,
    rotate_about_axis,
)

# Incidence below this angle (radians) is treated as exactly normal: the ray
# passes through undeviated and unsplit, which keeps center-origin chains
# collinear to machine precision.
NORMAL_INCIDENCE_ANGLE = 1e-7

BeamTag = Literal["thought", "percept", "deception_other", "deception_self", "probe"]
BEAM_TAGS = ("thought", "percept", "deception_other", "deception_self", "probe")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class WaveComponent:
    """One sinusoidal constituent of a thought's waveform."""

    frequency: float
    amplitude: float
    phase: float

    def __post_init__(self) -> None:
        if self.frequency <= 0.0:
            raise InvalidArgument("waveform frequency must be > 0")
        if self.amplitude < 0.0:
            raise InvalidArgument("waveform amplitude must be >= 0")
        if not 0.0 <= self.phase < 2.0 * math.pi:
            raise InvalidArgument("waveform phase must lie in [0, 2*pi)")


@dataclass(frozen=True, slots=True)
class Beam:
    """Directed light: a central axis plus divergence, intensity and
    waveform metadata. Waveform components ride along unmodified; splits
    only ever divide intensity."""

    axis: Ray
    divergence: float = 0.0
    intensity: float = 1.0
    waveform: tuple[WaveComponent, ...] = ()
    tag: str = "thought"

    def __post_init__(self) -> None:
        if not 0.0 <= self.divergence < math.pi / 2.0:
            raise InvalidArgument("beam divergence must lie in [0, pi/2)")
        if self.intensity < 0.0:
            raise InvalidArgument("beam intensity must be >= 0")
        if self.tag not in BEAM_TAGS:
            raise InvalidArgument(f"unknown beam tag {self.tag!r}")


@dataclass(frozen=True, slots=True)
class ShellGeometry:
    """A hollow glassy sphere: the shell band between inner and outer radius
    holds the refractive material; core and exterior are air."""

    center: Vec3
    outer_radius: float
    shell_thickness: float
    refractive_index: float
    shell_opacity: float = 0.0

    def __post_init__(self) -> None:
        if self.outer_radius <= 0.0:
            raise InvalidArgument("outer radius must be > 0")
        if not 0.0 < self.shell_thickness < self.outer_radius:
            raise InvalidArgument("shell thickness must lie in (0, outer_radius)")
        if self.refractive_index < 1.0:
            raise InvalidArgument("refractive index must be >= 1")
        if not 0.0 <= self.shell_opacity <= 1.0:
            raise InvalidArgument("shell opacity must lie in [0, 1]")

    @property
    def inner_radius(self) -> float:
        return self.outer_radius - self.shell_thickness


@dataclass(frozen=True, slots=True)
class RefractMode:
    """Crossing the disc refracts against a vein of offset index."""

    delta_index: float

    def __post_init__(self) -> None:
        if self.delta_index < 0.0:
            raise InvalidArgument("fracture delta_index must be >= 0")


@dataclass(frozen=True, slots=True)
class MirrorMode:
    """The disc is a two-sided mirror."""


@dataclass(frozen=True, slots=True)
class ScatterMode:
    """The disc fans the beam into ``fan_count`` equal-share rays spread
    across ``cone_half_angle`` in the plane of incidence. The count is odd
    so the undeviated center ray is always present."""

    fan_count: int
    cone_half_angle: float

    def __post_init__(self) -> None:
        if self.fan_count < 3 or self.fan_count % 2 == 0:
            raise InvalidArgument("scatter fan_count must be an odd integer >= 3")
        if not 0.0 < self.cone_half_angle < math.pi / 2.0:
            raise InvalidArgument("scatter cone half-angle must lie in (0, pi/2)")


FractureMode = Union[RefractMode, MirrorMode, ScatterMode]


@dataclass(frozen=True, slots=True)
class Fracture:
    """An oriented disc defect inside a sphere.

    ``label`` is a semantic tag carried through traces and reports; the
    kernel itself never interprets it.
    """

    center: Vec3
    normal: Vec3
    radius: float
    mode: FractureMode
    opacity: float = 0.0
    label: str = ""

    def __post_init__(self) -> None:
        require_unit(self.normal, "fracture normal")
        if self.radius <= 0.0:
            raise InvalidArgument("fracture radius must be > 0")
        if not 0.0 <= self.opacity <= 1.0:
            raise InvalidArgument("fracture opacity must lie in [0, 1]")


@dataclass(frozen=True, slots=True)
class TraceLimits:
    max_depth: int = 16
    min_intensity: float = 1e-4
    geometric_epsilon: float = 1e-9

    def __post_init__(self) -> None:
        if self.max_depth <= 0:
            raise InvalidArgument("max_depth must be > 0")
        if self.min_intensity <= 0.0:
            raise InvalidArgument("min_intensity must be > 0")
        if self.geometric_epsilon <= 0.0:
            raise InvalidArgument("geometric_epsilon must be > 0")


EventKind = Literal[
    "refract",
    "reflect",
    "total_internal_reflection",
    "fracture_hit",
    "absorbed",
    "escaped",
    "depth_cutoff",
    "intensity_cutoff",
]

EVENT_KINDS = (
    "refract",
    "reflect",
    "total_internal_reflection",
    "fracture_hit",
    "absorbed",
    "escaped",
    "depth_cutoff",
    "intensity_cutoff",
)


@dataclass(frozen=True, slots=True)
class InterfaceEvent:
    kind: str
    position: Vec3
    normal: Vec3
    incident_angle: float
    exit_angle: float
    fracture_label: Optional[str] = None


@dataclass(slots=True)
class TraceNode:
    """One straight segment of a traced beam, terminated by an event.

    ``intensity`` is the value at the segment start, ``terminal_intensity``
    the value at the event after in-medium attenuation. ``branch`` records
    how this segment split off its parent: root, transmitted, refracted,
    reflected or scattered.
    """

    start: Vec3
    end: Vec3
    direction: Vec3
    medium_index: float
    intensity: float
    terminal_intensity: float
    event: InterfaceEvent
    branch: str = "root"
    depth: int = 0
    children: list["TraceNode"] = field(default_factory=list)


@dataclass(slots=True)
class TraceTree:
    beam: Beam
    limits: TraceLimits
    root: TraceNode

    def iter_nodes(self) -> Iterator[TraceNode]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def energy_summary(self) -> "EnergySummary":
        escaped = absorbed = cutoff = 0.0
        for node in self.iter_nodes():
            absorbed += node.intensity - node.terminal_intensity
            kind = node.event.kind
            if kind == "escaped":
                escaped += node.terminal_intensity
            elif kind == "absorbed":
                absorbed += node.terminal_intensity
            elif kind in ("depth_cutoff", "intensity_cutoff"):
                cutoff += node.terminal_intensity
            elif node.children:
                # Interface absorption (fracture opacity) is the residual
                # between the parent terminal and the children's shares.
                absorbed += node.terminal_intensity - sum(
                    c.intensity for c in node.children
                )
        return EnergySummary(escaped=escaped, absorbed=absorbed, cutoff=cutoff)


@dataclass(frozen=True, slots=True)
class EnergySummary:
    escaped: float
    absorbed: float
    cutoff: float

    @property
    def total(self) -> float:
        return self.escaped + self.absorbed + self.cutoff


@dataclass(frozen=True, slots=True)
class ShellHit:
    t: float
    surface: Literal["outer", "inner"]
    normal: Vec3  # oriented to face the incoming ray


@dataclass(frozen=True, slots=True)
class FractureHit:
    t: float
    side: Literal["front", "back"]


SphereScene = Sequence[tuple[ShellGeometry, Sequence[Fracture]]]


# ---------------------------------------------------------------------------
# Interface physics
# ---------------------------------------------------------------------------

def refract(incident: Vec3, normal: Vec3, n1: float, n2: float) -> Optional[Vec3]:
    """Snell refraction of a unit ``incident`` direction at a surface with
    unit ``normal`` facing the incident side.

    Returns the unit transmitted direction, or ``None`` on total internal
    reflection (``sin(theta1) * n1/n2 > 1``).
    """
    require_unit(incident, "incident direction")
    require_unit(normal, "surface normal")
    if n1 < 1.0 or n2 < 1.0:
        raise InvalidArgument("refractive indices must be >= 1")
    cos1 = -incident.dot(normal)
    if cos1 <= 0.0:
        raise InvalidArgument("normal must face the incident side (incident.normal < 0)")
    mu = n1 / n2
    sin2_sq = mu * mu * (1.0 - cos1 * cos1)
    if sin2_sq > 1.0:
        return None
    cos2 = math.sqrt(1.0 - sin2_sq)
    out = incident * mu + normal * (mu * cos1 - cos2)
    return out.normalized()


def reflect(incident: Vec3, normal: Vec3) -> Vec3:
    """Mirror reflection: exit angle equals incident angle, in the
    incidence plane."""
    require_unit(incident, "incident direction")
    require_unit(normal, "surface normal")
    d = incident.dot(normal)
    if d >= 0.0:
        raise InvalidArgument("normal must face the incident side (incident.normal < 0)")
    return (incident - normal * (2.0 * d)).normalized()


def fresnel_unpolarized(theta1: float, n1: float, n2: float) -> float:
    """Unpolarized Fresnel reflectance, the mean of the s and p powers.

    Returns exactly 1.0 at and beyond the critical angle.
    """
    if not 0.0 <= theta1 <= math.pi / 2.0:
        raise InvalidArgument("incidence angle must lie in [0, pi/2]")
    if n1 < 1.0 or n2 < 1.0:
        raise InvalidArgument("refractive indices must be >= 1")
    cos1 = math.cos(theta1)
    sin1 = math.sin(theta1)
    sin2 = n1 / n2 * sin1
    if sin2 >= 1.0:
        return 1.0
    cos2 = math.sqrt(1.0 - sin2 * sin2)
    rs = (n1 * cos1 - n2 * cos2) / (n1 * cos1 + n2 * cos2)
    rp = (n1 * cos2 - n2 * cos1) / (n1 * cos2 + n2 * cos1)
    return 0.5 * (rs * rs + rp * rp)


def critical_angle(n1: float, n2: float) -> Optional[float]:
    """Angle beyond which light in medium ``n1`` cannot enter ``n2``;
    ``None`` when total internal reflection is impossible."""
    if n1 < 1.0 or n2 < 1.0:
        raise InvalidArgument("refractive indices must be >= 1")
    if n1 > n2:
        return math.asin(n2 / n1)
    return None


def attenuate(
    intensity_in: float, opacity: float, path_length: float, reference_length: float
) -> float:
    """Beer-Lambert style transmittance: one ``reference_length`` of travel
    multiplies intensity by ``1 - opacity``."""
    if not 0.0 <= opacity <= 1.0:
        raise InvalidArgument("opacity must lie in [0, 1]")
    if reference_length <= 0.0:
        raise InvalidArgument("reference length must be > 0")
    if path_length < 0.0:
        raise InvalidArgument("path length must be >= 0")
    if path_length == 0.0:
        return intensity_in
    if opacity >= 1.0:
        return 0.0
    return intensity_in * (1.0 - opacity) ** (path_length / reference_length)


# ---------------------------------------------------------------------------
# Intersection
# ---------------------------------------------------------------------------

def _sphere_roots(
    ray: Ray, center: Vec3, radius: float, eps: float
) -> tuple[float, ...]:
    """Roots t > eps of |ray(t) - center| = radius, ascending.

    Near-tangential contact (discriminant within eps of zero) counts as a
    miss: the normals there are numerically unstable.
    """
    oc = ray.origin - center
    b = ray.direction.dot(oc)
    c = oc.dot(oc) - radius * radius
    disc = b * b - c
    if disc < eps:
        return ()
    root = math.sqrt(disc)
    out = []
    for t in (-b - root, -b + root):
        if t > eps:
            out.append(t)
    return tuple(out)


def intersect_shell(ray: Ray, shell: ShellGeometry, eps: float = 1e-9) -> list[ShellHit]:
    """All forward hits of a ray against both surfaces of a shell, sorted
    ascending in t, normals oriented to face the incoming ray."""
    if ray.direction.length() == 0.0:
        raise InvalidArgument("degenerate ray")
    hits: list[ShellHit] = []
    for surface, radius in (("outer", shell.outer_radius), ("inner", shell.inner_radius)):
        for t in _sphere_roots(ray, shell.center, radius, eps):
            p = ray.at(t)
            n = (p - shell.center) * (1.0 / radius)
            if n.dot(ray.direction) > 0.0:
                n = -n
            hits.append(ShellHit(t=t, surface=surface, normal=n))  # type: ignore[arg-type]
    hits.sort(key=lambda h: h.t)
    return hits


def intersect_fracture(
    ray: Ray, fracture: Fracture, eps: float = 1e-9
) -> Optional[FractureHit]:
    """Forward crossing of the fracture's disc, or ``None``."""
    denom = fracture.normal.dot(ray.direction)
    if abs(denom) < eps:
        return None
    t = fracture.normal.dot(fracture.center - ray.origin) / denom
    if t <= eps:
        return None
    p = ray.at(t)
    if p.distance_to(fracture.center) > fracture.radius:
        return None
    side = "front" if denom < 0.0 else "back"
    return FractureHit(t=t, side=side)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Scene plumbing
# ---------------------------------------------------------------------------

def validate_scene(spheres: SphereScene) -> None:
    """Reject scenes whose sphere shells overlap (touching is allowed)."""
    items = list(spheres)
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            a, b = items[i][0], items[j][0]
            gap = a.center.distance_to(b.center) - (a.outer_radius + b.outer_radius)
            if gap < -1e-9:
                raise GeometryConflict(
                    f"sphere shells overlap (surface gap {gap:.3g} < 0)"
                )


OUTSIDE = ("outside", -1)


def classify_point(p: Vec3, spheres: SphereScene) -> tuple[str, int]:
    """Region containing ``p``: ('outside', -1), ('shell', i) or ('core', i).

    Points exactly on a surface are assigned to the enclosing region's
    outer side (core boundary counts as core, outer boundary as shell).
    """
    for i, (shell, _) in enumerate(spheres):
        rho = p.distance_to(shell.center)
        if rho <= shell.inner_radius:
            return ("core", i)
        if rho <= shell.outer_radius:
            return ("shell", i)
    return OUTSIDE


def _region_index(region: tuple[str, int], spheres: SphereScene) -> float:
    kind, i = region
    if kind == "shell":
        return spheres[i][0].refractive_index
    return 1.0


def _scene_bound(spheres: SphereScene) -> tuple[Vec3, float]:
    """A deterministic bounding sphere used to cap escaped segments."""
    items = list(spheres)
    if not items:
        return Vec3(0.0, 0.0, 0.0), 10.0
    n = float(len(items))
    cx = sum(s.center.x for s, _ in items) / n
    cy = sum(s.center.y for s, _ in items) / n
    cz = sum(s.center.z for s, _ in items) / n
    center = Vec3(cx, cy, cz)
    radius = max(s.center.distance_to(center) + s.outer_radius for s, _ in items)
    return center, radius + 1.0


def _escape_distance(origin: Vec3, direction: Vec3, bound: tuple[Vec3, float]) -> float:
    center, radius = bound
    oc = origin - center
    b = direction.dot(oc)
    c = oc.dot(oc) - radius * radius
    disc = b * b - c
    if disc <= 0.0:
        return 1.0
    t = -b + math.sqrt(disc)
    return t if t > 0.0 else 1.0


@dataclass(frozen=True, slots=True)
class _SurfaceHit:
    t: float
    sphere: int
    surface: str
    normal: Vec3


@dataclass(frozen=True, slots=True)
class _DiscHit:
    t: float
    sphere: int
    fracture: Fracture


def _next_interface(
    origin: Vec3,
    direction: Vec3,
    region: tuple[str, int],
    spheres: SphereScene,
    eps: float,
) -> Optional[Union[_SurfaceHit, _DiscHit]]:
    ray = Ray(origin, direction)
    best: Optional[Union[_SurfaceHit, _DiscHit]] = None
    for i, (shell, fractures) in enumerate(spheres):
        shell_hits = intersect_shell(ray, shell, eps)
        if shell_hits:
            h = shell_hits[0]
            if best is None or h.t < best.t:
                best = _SurfaceHit(t=h.t, sphere=i, surface=h.surface, normal=h.normal)
        if region[1] == i:
            # Fracture discs only interact with light inside their host.
            for fr in fractures:
                fh = intersect_fracture(ray, fr, eps)
                if fh is not None and (best is None or fh.t < best.t):
                    best = _DiscHit(t=fh.t, sphere=i, fracture=fr)
    return best


def _oriented(normal: Vec3, direction: Vec3) -> Vec3:
    return -normal if normal.dot(direction) > 0.0 else normal


def _incidence(direction: Vec3, normal: Vec3) -> float:
    return math.acos(max(-1.0, min(1.0, -direction.dot(normal))))


def _surface_media(
    surface: str, going_inward: bool, shell: ShellGeometry
) -> tuple[float, float]:
    """(n1, n2) across a shell surface given the crossing direction."""
    n = shell.refractive_index
    if surface == "outer":
        return (1.0, n) if going_inward else (n, 1.0)
    return (n, 1.0) if going_inward else (1.0, n)


def _scatter_directions(
    direction: Vec3, disc_normal: Vec3, mode: ScatterMode
) -> list[Vec3]:
    """Deterministic fan spread across the plane of incidence."""
    axis = direction.cross(_oriented(disc_normal, direction))
    if axis.length() < 1e-12:
        axis = perpendicular_to(direction)
    else:
        axis = axis.normalized()
    count = mode.fan_count
    half = mode.cone_half_angle
    step = 2.0 * half / (count - 1)
    return [
        rotate_about_axis(direction, axis, -half + k * step).normalized()
        for k in range(count)
    ]


# ---------------------------------------------------------------------------
# Beam tracing
# ---------------------------------------------------------------------------

def trace_beam(spheres: SphereScene, beam: Beam, limits: TraceLimits | None = None) -> TraceTree:
    """Recursively trace a beam's central axis through the scene.

    At each dielectric interface the beam splits into a refracted child with
    intensity ``(1 - R) * I`` and a reflected child with ``R * I`` (Fresnel
    unpolarized ``R``); past the critical angle only the reflected child
    survives. Incidence within ``NORMAL_INCIDENCE_ANGLE`` of the normal
    passes through unsplit so center-origin rays stay exactly collinear.
    Fracture discs apply their mode; shell travel attenuates per the shell's
    opacity. Recursion stops on escape, ``max_depth`` or ``min_intensity``.
    """
    if limits is None:
        limits = TraceLimits()
    validate_scene(spheres)
    if beam.intensity < limits.min_intensity:
        raise InvalidArgument("beam intensity is below the trace intensity cutoff")
    bound = _scene_bound(spheres)
    region = classify_point(beam.axis.origin, spheres)
    root = _trace(
        beam.axis.origin,
        beam.axis.direction,
        beam.intensity,
        region,
        0,
        "root",
        spheres,
        limits,
        bound,
    )
    return TraceTree(beam=beam, limits=limits, root=root)


def _stub(position: Vec3, direction: Vec3, intensity: float, kind: str, depth: int,
          branch: str, fracture_label: Optional[str] = None) -> TraceNode:
    event = InterfaceEvent(
        kind=kind,
        position=position,
        normal=-direction,
        incident_angle=0.0,
        exit_angle=0.0,
        fracture_label=fracture_label,
    )
    return TraceNode(
        start=position,
        end=position,
        direction=direction,
        medium_index=1.0,
        intensity=intensity,
        terminal_intensity=intensity,
        event=event,
        branch=branch,
        depth=depth,
    )


def _spawn(
    position: Vec3,
    direction: Vec3,
    share: float,
    region: tuple[str, int],
    depth: int,
    branch: str,
    spheres: SphereScene,
    limits: TraceLimits,
    bound: tuple[Vec3, float],
) -> TraceNode:
    if share < limits.min_intensity:
        return _stub(position, direction, share, "intensity_cutoff", depth, branch)
    return _trace(position, direction, share, region, depth, branch, spheres, limits, bound)


def _trace(
    origin: Vec3,
    direction: Vec3,
    intensity: float,
    region: tuple[str, int],
    depth: int,
    branch: str,
    spheres: SphereScene,
    limits: TraceLimits,
    bound: tuple[Vec3, float],
) -> TraceNode:
    eps = limits.geometric_epsilon
    n_here = _region_index(region, spheres)
    hit = _next_interface(origin, direction, region, spheres, eps)

    if hit is None:
        t_end = _escape_distance(origin, direction, bound)
        end = origin + direction * t_end
        terminal = _attenuate_segment(intensity, region, t_end, spheres)
        kind = "absorbed" if terminal == 0.0 else "escaped"
        event = InterfaceEvent(kind, end, -direction, 0.0, 0.0)
        return TraceNode(origin, end, direction, n_here, intensity, terminal,
                         event, branch, depth)

    end = origin + direction * hit.t
    terminal = _attenuate_segment(intensity, region, hit.t, spheres)

    if terminal == 0.0:
        event = InterfaceEvent("absorbed", end, -direction, 0.0, 0.0)
        return TraceNode(origin, end, direction, n_here, intensity, terminal,
                         event, branch, depth)
    if terminal < limits.min_intensity:
        event = InterfaceEvent("intensity_cutoff", end, -direction, 0.0, 0.0)
        return TraceNode(origin, end, direction, n_here, intensity, terminal,
                         event, branch, depth)
    if depth >= limits.max_depth:
        event = InterfaceEvent("depth_cutoff", end, -direction, 0.0, 0.0)
        return TraceNode(origin, end, direction, n_here, intensity, terminal,
                         event, branch, depth)

    if isinstance(hit, _DiscHit):
        return _fracture_node(
            origin, direction, intensity, terminal, region, depth, branch,
            hit, spheres, limits, bound, n_here,
        )
    return _surface_node(
        origin, direction, intensity, terminal, region, depth, branch,
        hit, spheres, limits, bound, n_here,
    )


def _attenuate_segment(
    intensity: float, region: tuple[str, int], length: float, spheres: SphereScene
) -> float:
    kind, i = region
    if kind != "shell":
        return intensity
    shell = spheres[i][0]
    if shell.shell_opacity == 0.0:
        return intensity
    return attenuate(intensity, shell.shell_opacity, length, shell.shell_thickness)


def _surface_node(
    origin: Vec3,
    direction: Vec3,
    intensity: float,
    terminal: float,
    region: tuple[str, int],
    depth: int,
    branch: str,
    hit: _SurfaceHit,
    spheres: SphereScene,
    limits: TraceLimits,
    bound: tuple[Vec3, float],
    n_here: float,
) -> TraceNode:
    end = origin + direction * hit.t
    shell = spheres[hit.sphere][0]
    outward = (end - shell.center).normalized()
    going_inward = direction.dot(outward) < 0.0
    n1, n2 = _surface_media(hit.surface, going_inward, shell)
    theta1 = _incidence(direction, hit.normal)

    if hit.surface == "outer":
        inside_region = ("shell", hit.sphere)
        outside_region: tuple[str, int] = OUTSIDE
    else:
        inside_region = ("core", hit.sphere)
        outside_region = ("shell", hit.sphere)
    across = inside_region if going_inward else outside_region
    same = outside_region if going_inward else inside_region

    children: list[TraceNode] = []
    if theta1 <= NORMAL_INCIDENCE_ANGLE:
        # Idealized normal incidence: no split, no deviation.
        event = InterfaceEvent("refract", end, hit.normal, 0.0, 0.0)
        children.append(
            _spawn(end, direction, terminal, across, depth + 1, "transmitted",
                   spheres, limits, bound)
        )
    else:
        refracted = refract(direction, hit.normal, n1, n2)
        if refracted is None:
            event = InterfaceEvent("total_internal_reflection", end, hit.normal,
                                   theta1, theta1)
            reflected = reflect(direction, hit.normal)
            children.append(
                _spawn(end, reflected, terminal, same, depth + 1, "reflected",
                       spheres, limits, bound)
            )
        else:
            theta2 = _incidence(refracted, hit.normal)
            reflectance = fresnel_unpolarized(theta1, n1, n2)
            event = InterfaceEvent("refract", end, hit.normal, theta1, theta2)
            children.append(
                _spawn(end, refracted, (1.0 - reflectance) * terminal, across,
                       depth + 1, "refracted", spheres, limits, bound)
            )
            reflected = reflect(direction, hit.normal)
            children.append(
                _spawn(end, reflected, reflectance * terminal, same,
                       depth + 1, "reflected", spheres, limits, bound)
            )

    node = TraceNode(origin, end, direction, n_here, intensity, terminal,
                     event, branch, depth)
    node.children = children
    return node


def _fracture_node(
    origin: Vec3,
    direction: Vec3,
    intensity: float,
    terminal: float,
    region: tuple[str, int],
    depth: int,
    branch: str,
    hit: _DiscHit,
    spheres: SphereScene,
    limits: TraceLimits,
    bound: tuple[Vec3, float],
    n_here: float,
) -> TraceNode:
    end = origin + direction * hit.t
    fr = hit.fracture
    face = _oriented(fr.normal, direction)
    theta1 = _incidence(direction, face)
    passed = (1.0 - fr.opacity) * terminal

    if passed == 0.0:
        event = InterfaceEvent("absorbed", end, face, theta1, 0.0,
                               fracture_label=fr.label)
        return TraceNode(origin, end, direction, n_here, intensity, terminal,
                         event, branch, depth)

    children: list[TraceNode] = []
    if isinstance(fr.mode, MirrorMode):
        out = reflect(direction, face)
        event = InterfaceEvent("fracture_hit", end, face, theta1, theta1,
                               fracture_label=fr.label)
        children.append(
            _spawn(end, out, passed, region, depth + 1, "reflected",
                   spheres, limits, bound)
        )
    elif isinstance(fr.mode, RefractMode):
        # The disc is a thin vein: crossing front-to-back refracts into the
        # offset index, back-to-front refracts out of it.
        crossing_in = direction.dot(fr.normal) < 0.0
        n_vein = n_here + fr.mode.delta_index
        n1, n2 = (n_here, n_vein) if crossing_in else (n_vein, n_here)
        if theta1 <= NORMAL_INCIDENCE_ANGLE:
            event = InterfaceEvent("fracture_hit", end, face, theta1, theta1,
                                   fracture_label=fr.label)
            children.append(
                _spawn(end, direction, passed, region, depth + 1, "transmitted",
                       spheres, limits, bound)
            )
        else:
            out = refract(direction, face, n1, n2)
            if out is None:
                out = reflect(direction, face)
                event = InterfaceEvent("fracture_hit", end, face, theta1, theta1,
                                       fracture_label=fr.label)
                children.append(
                    _spawn(end, out, passed, region, depth + 1, "reflected",
                           spheres, limits, bound)
                )
            else:
                theta2 = _incidence(out, face)
                event = InterfaceEvent("fracture_hit", end, face, theta1, theta2,
                                       fracture_label=fr.label)
                children.append(
                    _spawn(end, out, passed, region, depth + 1, "refracted",
                           spheres, limits, bound)
                )
    else:
        mode = fr.mode
        assert isinstance(mode, ScatterMode)
        share = passed / mode.fan_count
        event = InterfaceEvent("fracture_hit", end, face, theta1, theta1,
                               fracture_label=fr.label)
        for out in _scatter_directions(direction, fr.normal, mode):
            children.append(
                _spawn(end, out, share, region, depth + 1, "scattered",
                       spheres, limits, bound)
            )

    node = TraceNode(origin, end, direction, n_here, intensity, terminal,
                     event, branch, depth)
    node.children = children
    return node


# ---------------------------------------------------------------------------
# Marginal-ray divergence tracking
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class BundleSegment:
    """Divergence state over one straight stretch of the followed chain.

    ``divergence`` is the half-angle between the two marginal rays during
    the segment, or ``None`` (``defined`` False) once a marginal has been
    lost. ``reflectance`` is the Fresnel R of the event ending the segment
    when that event is a dielectric split.
    """

    index: int
    start: Vec3
    end: Vec3
    medium_index: float
    intensity: float
    divergence: Optional[float]
    defined: bool
    event_kind: str
    reflectance: Optional[float] = None
    fracture_label: Optional[str] = None


def bundle_divergence(
    beam: Beam,
    spheres: SphereScene,
    limits: TraceLimits | None = None,
    policy: Literal["refract", "reflect"] = "refract",
    plane_axis: Vec3 | None = None,
) -> list[BundleSegment]:
    """Track beam divergence as a central ray plus two marginal rays tilted
    by ``+-beam.divergence`` in a fixed plane.

    ``plane_axis`` (unit, perpendicular to the beam axis) is the normal of
    the plane the marginals are tilted in; when omitted a deterministic
    perpendicular of the axis is used. The chain follows one branch at each
    interface: ``refract`` policy takes the transmitted ray when it exists
    (falling back to reflection under TIR); ``reflect`` policy always takes
    the reflected ray. Each marginal interacts with the same surface at its
    own hit point and normal; when a marginal misses the surface, or splits
    differently from the central ray (for example TIR on one marginal only),
    divergence becomes undefined and the segment is flagged.
    """
    if limits is None:
        limits = TraceLimits()
    validate_scene(spheres)
    if not 0.0 <= beam.divergence <= math.pi / 4.0:
        raise InvalidArgument("bundle divergence must lie in [0, pi/4]")

    eps = limits.geometric_epsilon
    bound = _scene_bound(spheres)
    d0 = beam.axis.direction
    if plane_axis is None:
        tilt_axis = perpendicular_to(d0)
    else:
        require_unit(plane_axis, "plane axis")
        if abs(plane_axis.dot(d0)) > 1e-9:
            raise InvalidArgument("plane axis must be perpendicular to the beam axis")
        tilt_axis = plane_axis
    origin = beam.axis.origin

    central = d0
    plus = rotate_about_axis(d0, tilt_axis, beam.divergence).normalized()
    minus = rotate_about_axis(d0, tilt_axis, -beam.divergence).normalized()
    c_pos = m_plus_pos = m_minus_pos = origin
    marginals_ok = True
    intensity = beam.intensity
    region = classify_point(origin, spheres)
    segments: list[BundleSegment] = []

    for index in range(limits.max_depth + 1):
        hit = _next_interface(c_pos, central, region, spheres, eps)
        divergence = _half_angle(plus, minus) if marginals_ok else None

        if hit is None:
            t_end = _escape_distance(c_pos, central, bound)
            segments.append(BundleSegment(
                index, c_pos, c_pos + central * t_end,
                _region_index(region, spheres), intensity,
                divergence, marginals_ok, "escaped",
            ))
            break

        end = c_pos + central * hit.t
        n_here = _region_index(region, spheres)
        terminal = _attenuate_segment(intensity, region, hit.t, spheres)

        if index == limits.max_depth:
            segments.append(BundleSegment(
                index, c_pos, end, n_here, intensity,
                divergence, marginals_ok, "depth_cutoff",
            ))
            break
        if terminal < limits.min_intensity:
            segments.append(BundleSegment(
                index, c_pos, end, n_here, intensity,
                divergence, marginals_ok, "intensity_cutoff",
            ))
            break

        if isinstance(hit, _DiscHit):
            step = _bundle_fracture_step(central, plus, minus, end,
                                         m_plus_pos, m_minus_pos, hit,
                                         marginals_ok, n_here, eps)
        else:
            step = _bundle_surface_step(central, plus, minus, end,
                                        m_plus_pos, m_minus_pos, hit,
                                        marginals_ok, spheres, policy, eps)
        (central, plus, minus, m_plus_pos, m_minus_pos,
         marginals_ok, event_kind, reflectance, share, next_region,
         fracture_label) = step

        segments.append(BundleSegment(
            index, c_pos, end, n_here, intensity, divergence, divergence is not None,
            event_kind, reflectance, fracture_label,
        ))

        c_pos = end
        intensity = terminal * share
        region = next_region if next_region is not None else region
        if intensity < limits.min_intensity:
            segments.append(BundleSegment(
                index + 1, c_pos, c_pos, _region_index(region, spheres),
                intensity, _half_angle(plus, minus) if marginals_ok else None,
                marginals_ok, "intensity_cutoff",
            ))
            break

    return segments


def _half_angle(a: Vec3, b: Vec3) -> float:
    return 0.5 * angle_between(a, b)


def _bundle_surface_step(
    central: Vec3,
    plus: Vec3,
    minus: Vec3,
    end: Vec3,
    m_plus_pos: Vec3,
    m_minus_pos: Vec3,
    hit: _SurfaceHit,
    marginals_ok: bool,
    spheres: SphereScene,
    policy: str,
    eps: float,
):
    shell = spheres[hit.sphere][0]
    outward = (end - shell.center).normalized()
    going_inward = central.dot(outward) < 0.0
    n1, n2 = _surface_media(hit.surface, going_inward, shell)
    theta1 = _incidence(central, hit.normal)

    if hit.surface == "outer":
        inside_region = ("shell", hit.sphere)
        outside_region: tuple[str, int] = OUTSIDE
    else:
        inside_region = ("core", hit.sphere)
        outside_region = ("shell", hit.sphere)
    across = inside_region if going_inward else outside_region
    same = outside_region if going_inward else inside_region

    refracted = None if theta1 <= NORMAL_INCIDENCE_ANGLE else refract(central, hit.normal, n1, n2)
    if theta1 <= NORMAL_INCIDENCE_ANGLE:
        take = "transmit"
        new_central = central
        event_kind = "refract"
        reflectance = None
        share = 1.0
        next_region = across
    elif policy == "reflect" or refracted is None:
        take = "reflect"
        new_central = reflect(central, hit.normal)
        event_kind = "total_internal_reflection" if refracted is None else "reflect"
        r = 1.0 if refracted is None else fresnel_unpolarized(theta1, n1, n2)
        reflectance = r
        share = r
        next_region = same
    else:
        take = "refract"
        new_central = refracted
        reflectance = fresnel_unpolarized(theta1, n1, n2)
        share = 1.0 - reflectance
        event_kind = "refract"
        next_region = across

    new_plus, p_pos, ok_p = _marginal_step(plus, m_plus_pos, hit, shell, n1, n2, take, eps)
    new_minus, m_pos, ok_m = _marginal_step(minus, m_minus_pos, hit, shell, n1, n2, take, eps)
    ok = marginals_ok and ok_p and ok_m

    return (new_central, new_plus, new_minus, p_pos, m_pos, ok,
            event_kind, reflectance, share, next_region, None)


def _marginal_step(
    direction: Vec3,
    position: Vec3,
    hit: _SurfaceHit,
    shell: ShellGeometry,
    n1: float,
    n2: float,
    take: str,
    eps: float,
):
    radius = shell.outer_radius if hit.surface == "outer" else shell.inner_radius
    roots = _sphere_roots(Ray(position, direction), shell.center, radius, eps)
    if not roots:
        return direction, position, False
    t = roots[0]
    p = position + direction * t
    n = (p - shell.center) * (1.0 / radius)
    if n.dot(direction) > 0.0:
        n = -n
    theta = _incidence(direction, n)
    if take == "transmit" or theta <= NORMAL_INCIDENCE_ANGLE:
        return direction, p, True
    if take == "reflect":
        return reflect(direction, n), p, True
    out = refract(direction, n, n1, n2)
    if out is None:
        # TIR on this marginal only: bundle divergence is no longer defined.
        return reflect(direction, n), p, False
    return out, p, True


def _bundle_fracture_step(
    central: Vec3,
    plus: Vec3,
    minus: Vec3,
    end: Vec3,
    m_plus_pos: Vec3,
    m_minus_pos: Vec3,
    hit: _DiscHit,
    marginals_ok: bool,
    n_here: float,
    eps: float,
):
    fr = hit.fracture
    face = _oriented(fr.normal, central)
    theta1 = _incidence(central, face)
    share = 1.0 - fr.opacity

    if isinstance(fr.mode, MirrorMode):
        new_central = reflect(central, face)
        op = "reflect"
    elif isinstance(fr.mode, RefractMode):
        crossing_in = central.dot(fr.normal) < 0.0
        n_vein = n_here + fr.mode.delta_index
        n1, n2 = (n_here, n_vein) if crossing_in else (n_vein, n_here)
        out = None if theta1 <= NORMAL_INCIDENCE_ANGLE else refract(central, face, n1, n2)
        new_central = central if out is None else out
        op = "transmit" if out is None else "refract-disc"
    else:
        new_central = central  # scatter: follow the undeviated center ray
        op = "transmit"

    def marginal(d: Vec3, p: Vec3):
        fh = intersect_fracture(Ray(p, d), fr, eps)
        if fh is None:
            return d, p, False
        q = p + d * fh.t
        f = _oriented(fr.normal, d)
        if op == "reflect":
            return reflect(d, f), q, True
        if op == "refract-disc":
            crossing_in = d.dot(fr.normal) < 0.0
            nv = n_here + fr.mode.delta_index  # type: ignore[union-attr]
            a, b = (n_here, nv) if crossing_in else (nv, n_here)
            th = _incidence(d, f)
            if th <= NORMAL_INCIDENCE_ANGLE:
                return d, q, True
            o = refract(d, f, a, b)
            if o is None:
                return reflect(d, f), q, False
            return o, q, True
        return d, q, True

    new_plus, p_pos, ok_p = marginal(plus, m_plus_pos)
    new_minus, m_pos, ok_m = marginal(minus, m_minus_pos)
    ok = marginals_ok and ok_p and ok_m
    return (new_central, new_plus, new_minus, p_pos, m_pos, ok,
            "fracture_hit", None, share, None, fr.label)
