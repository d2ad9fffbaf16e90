"""Psyche semantics: compiles psychological attributes into optical
parameters and computes the interpretive metrics built on top of the optics
kernel (reflection, deception routing, enlightenment, shadow scanning).

All attribute-to-optics maps are linear with fixed constants; every
operation is deterministic, including fracture placement and surface
patterns, which derive from stable content hashes rather than process
state.
"""

from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources
from typing import Literal, Optional

from .errors import (
    InvalidArgument,
    NoFractureError,
    ReflectionObstructed,
    SparkStateError,
    UndefinedScore,
)
from .geometry import Ray, Vec3, Z_AXIS, angle_between, perpendicular_to, rotate_about_axis
from .optics import (
    Beam,
    Fracture,
    FractureMode,
    MirrorMode,
    RefractMode,
    ScatterMode,
    ShellGeometry,
    TraceLimits,
    WaveComponent,
    bundle_divergence,
    intersect_fracture,
    reflect,
    refract,
)

# Attribute -> optics mapping constants.
EMITTER_REFERENCE = 1.0           # emitter intensity at vitality 1
INDEX_BASE = 1.3                  # refractive index at depth 0
INDEX_SPAN = 0.4                  # index gain from depth
MIN_PROBE_INTENSITY = 0.01        # beam intensity for a zero-valence thought
MAX_THOUGHT_DIVERGENCE = math.pi / 6.0
COMFORT_BLUR_FACTOR = 0.15

# Fracture placement: radial station (as a fraction of the inner radius)
# per placement hint, and the fixed tilt of the disc normal off radial so
# center-aimed beams always strike obliquely.
SURFACE_STATION = 0.85
INTERIOR_STATION = 0.35
FRACTURE_TILT = math.pi / 6.0

# Launch convention for reflect_on: the thought starts a quarter inner
# radius off center, aimed 45 degrees off radial in the sphere's local x-y
# plane, so bounces stay planar and strictly focusing.
REFLECT_LAUNCH_STATION = 0.25
REFLECT_LAUNCH_ANGLE = math.pi / 4.0
MAX_REFLECTION_BOUNCES = 64

PROBE_COUNT = 312

Placement = Literal["surface", "interior"]
PATTERN_IDS = ("bands", "spots", "marble")


def stable_hash(text: str) -> int:
    """64-bit content hash, stable across processes and platforms."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "big")


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ShadowAspect:
    """A labeled shadow aspect; optional overrides pin the compiled
    fracture's interaction mode and opacity."""

    label: str
    severity: float
    placement: Placement
    mode_override: Optional[FractureMode] = None
    opacity_override: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.label:
            raise InvalidArgument("shadow aspect label must be non-empty")
        if not 0.0 < self.severity <= 1.0:
            raise InvalidArgument("shadow severity must lie in (0, 1]")
        if self.placement not in ("surface", "interior"):
            raise InvalidArgument("placement must be 'surface' or 'interior'")
        if self.opacity_override is not None and not 0.0 <= self.opacity_override <= 1.0:
            raise InvalidArgument("opacity override must lie in [0, 1]")


@dataclass(frozen=True, slots=True)
class PsycheAttributes:
    name: str
    vitality: float
    accessibility: float
    depth: float
    traits: tuple[tuple[str, float], ...] = ()
    shadow_aspects: tuple[ShadowAspect, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidArgument("psyche name must be non-empty")
        for field_name in ("vitality", "accessibility", "depth"):
            value = getattr(self, field_name)
            if not 0.0 <= value <= 1.0:
                raise InvalidArgument(f"{field_name} must lie in [0, 1], got {value!r}")
        names = [t for t, _ in self.traits]
        if len(names) != len(set(names)):
            raise InvalidArgument("trait names must be unique")
        for t, s in self.traits:
            if not 0.0 <= s <= 1.0:
                raise InvalidArgument(f"trait {t!r} strength must lie in [0, 1]")
        labels = [a.label for a in self.shadow_aspects]
        if len(labels) != len(set(labels)):
            raise InvalidArgument("shadow aspect labels must be unique")
        # Canonical ordering keeps compilation and serialization stable.
        object.__setattr__(self, "traits", tuple(sorted(self.traits)))
        object.__setattr__(
            self, "shadow_aspects",
            tuple(sorted(self.shadow_aspects, key=lambda a: a.label)),
        )

    def trait_map(self) -> dict[str, float]:
        return dict(self.traits)


@dataclass(frozen=True, slots=True)
class SurfacePattern:
    pattern_id: str
    base_hue: float
    accent_hue: float
    scale: float
    seed: int

    def __post_init__(self) -> None:
        if self.pattern_id not in PATTERN_IDS:
            raise InvalidArgument(f"unknown pattern id {self.pattern_id!r}")
        if self.scale <= 0.0:
            raise InvalidArgument("pattern scale must be > 0")


NEUTRAL_PATTERN = SurfacePattern("bands", 210.0, 210.0, 1.0, 0)


@dataclass(frozen=True, slots=True)
class PsycheSphere:
    attributes: PsycheAttributes
    shell: ShellGeometry
    emitter_intensity: float
    fractures: tuple[Fracture, ...]
    pattern: SurfacePattern

    @property
    def name(self) -> str:
        return self.attributes.name

    @property
    def center(self) -> Vec3:
        return self.shell.center

    def scene_entry(self) -> tuple[ShellGeometry, tuple[Fracture, ...]]:
        return (self.shell, self.fractures)

    def fractures_by_placement(self, placement: Placement) -> list[tuple[ShadowAspect, Fracture]]:
        pairs = zip(self.attributes.shadow_aspects, self.fractures)
        return [(a, f) for a, f in pairs if a.placement == placement]


@dataclass(frozen=True, slots=True)
class Thought:
    valence: float
    clarity: float
    components: tuple[WaveComponent, ...] = ()
    state: Literal["spark", "active"] = "active"

    def __post_init__(self) -> None:
        if not -1.0 <= self.valence <= 1.0:
            raise InvalidArgument("thought valence must lie in [-1, 1]")
        if not 0.0 <= self.clarity <= 1.0:
            raise InvalidArgument("thought clarity must lie in [0, 1]")
        if self.state not in ("spark", "active"):
            raise InvalidArgument("thought state must be 'spark' or 'active'")
        if self.state == "active" and not self.components:
            raise InvalidArgument("active thoughts need at least one waveform component")


class ComfortRelation:
    """Symmetric psyche-pair comfort map; missing pairs read as zero."""

    def __init__(self, pairs: dict[tuple[str, str], float] | None = None):
        self._pairs: dict[tuple[str, str], float] = {}
        if pairs:
            for (a, b), value in pairs.items():
                self.set(a, b, value)

    @staticmethod
    def _key(a: str, b: str) -> tuple[str, str]:
        if a == b:
            raise InvalidArgument("comfort is defined between distinct psyches")
        return (a, b) if a < b else (b, a)

    def set(self, a: str, b: str, comfort: float) -> None:
        if not 0.0 <= comfort <= 1.0:
            raise InvalidArgument("comfort must lie in [0, 1]")
        key = self._key(a, b)
        if comfort == 0.0:
            self._pairs.pop(key, None)
        else:
            self._pairs[key] = comfort

    def get(self, a: str, b: str) -> float:
        return self._pairs.get(self._key(a, b), 0.0)

    def items(self) -> list[tuple[tuple[str, str], float]]:
        return sorted(self._pairs.items())

    def drop_psyche(self, name: str) -> None:
        self._pairs = {k: v for k, v in self._pairs.items() if name not in k}

    def copy(self) -> "ComfortRelation":
        return ComfortRelation(dict(self._pairs))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ComfortRelation) and self._pairs == other._pairs

    def __repr__(self) -> str:
        return f"ComfortRelation({self._pairs!r})"


# ---------------------------------------------------------------------------
# Trait patterns
# ---------------------------------------------------------------------------

@lru_cache(maxsize=1)
def trait_hue_table() -> dict[str, float]:
    """The versioned trait-name -> hue-degrees table shipped with the
    package (one ``name hue`` pair per line)."""
    text = resources.files("liveia").joinpath("data/trait_hues.txt").read_text("utf-8")
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    header = lines[0].split()
    if header[0] != "liveia-trait-hues":
        raise InvalidArgument("trait hue table has an unknown header")
    table: dict[str, float] = {}
    for ln in lines[1:]:
        name, hue = ln.split()
        table[name] = float(hue)
    return table


def hue_for_trait(name: str) -> float:
    table = trait_hue_table()
    if name in table:
        return table[name]
    return float(stable_hash(name) % 360)


def trait_pattern(traits: dict[str, float] | tuple[tuple[str, float], ...]) -> SurfacePattern:
    """Deterministic surface pattern from a trait map.

    Pattern id comes from the strongest trait's name hash, hues from the
    shipped table, scale from the mean strength, seed from a stable hash of
    the whole sorted map. Empty maps get the neutral default.
    """
    items = sorted(dict(traits).items())
    if not items:
        return NEUTRAL_PATTERN
    ranked = sorted(items, key=lambda kv: (kv[1], kv[0]))
    strongest = ranked[-1][0]
    pattern_id = PATTERN_IDS[stable_hash(strongest) % 3]
    base_hue = hue_for_trait(strongest)
    if len(ranked) > 1:
        accent_hue = hue_for_trait(ranked[-2][0])
    else:
        accent_hue = (base_hue + 40.0) % 360.0
    scale = sum(s for _, s in items) / len(items)
    seed_text = ";".join(f"{name}={strength:.9g}" for name, strength in items)
    return SurfacePattern(
        pattern_id=pattern_id,
        base_hue=base_hue,
        accent_hue=accent_hue,
        scale=max(scale, 1e-9),
        seed=stable_hash(seed_text) % (2**32),
    )


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

def _placement_direction(label: str) -> Vec3:
    h = stable_hash(label)
    azimuth = 2.0 * math.pi * ((h % 3600) / 3600.0)
    latitude = (((h // 3600) % 1200) / 1200.0) * 1.2 - 0.6
    cl = math.cos(latitude)
    return Vec3(cl * math.cos(azimuth), cl * math.sin(azimuth), math.sin(latitude))


def compile_fracture(aspect: ShadowAspect, center: Vec3, inner_radius: float) -> Fracture:
    station = SURFACE_STATION if aspect.placement == "surface" else INTERIOR_STATION
    u = _placement_direction(aspect.label)
    disc_center = center + u * (station * inner_radius)
    normal = rotate_about_axis(u, perpendicular_to(u), FRACTURE_TILT).normalized()
    mode = aspect.mode_override
    if mode is None:
        mode = RefractMode(delta_index=0.2 + 0.3 * aspect.severity)
    opacity = aspect.opacity_override
    if opacity is None:
        opacity = aspect.severity
    return Fracture(
        center=disc_center,
        normal=normal,
        radius=aspect.severity * inner_radius * 0.5,
        mode=mode,
        opacity=opacity,
        label=aspect.label,
    )


def compile_psyche(attrs: PsycheAttributes, position: Vec3, outer_radius: float) -> PsycheSphere:
    """Translate attributes into the optical embodiment.

    vitality scales the emitter, accessibility thins and clears the shell,
    depth raises the refractive index, and each shadow aspect becomes one
    fracture disc. The mapping is linear and monotone in every scalar, and
    recompiling the same attributes reproduces the sphere field for field.
    """
    if outer_radius <= 0.0:
        raise InvalidArgument("outer radius must be > 0")
    shell = ShellGeometry(
        center=position,
        outer_radius=outer_radius,
        shell_thickness=0.05 * outer_radius + 0.10 * outer_radius * (1.0 - attrs.accessibility),
        refractive_index=INDEX_BASE + INDEX_SPAN * attrs.depth,
        shell_opacity=1.0 - attrs.accessibility,
    )
    fractures = tuple(
        compile_fracture(aspect, position, shell.inner_radius)
        for aspect in attrs.shadow_aspects
    )
    return PsycheSphere(
        attributes=attrs,
        shell=shell,
        emitter_intensity=EMITTER_REFERENCE * attrs.vitality,
        fractures=fractures,
        pattern=trait_pattern(attrs.traits),
    )


def compile_thought(thought: Thought, origin: Vec3, direction: Vec3) -> Beam:
    """Turn an active thought into a traceable beam: valence magnitude sets
    intensity (floored at the probe minimum), vagueness sets divergence."""
    if thought.state == "spark":
        raise SparkStateError("a resting spark is not emitted or traced")
    return Beam(
        axis=Ray(origin, direction),
        divergence=(1.0 - thought.clarity) * MAX_THOUGHT_DIVERGENCE,
        intensity=max(abs(thought.valence), MIN_PROBE_INTENSITY),
        waveform=thought.components,
        tag="thought",
    )


# ---------------------------------------------------------------------------
# Reflection
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ReflectionReport:
    iterations: int
    final_divergence: float
    articulable: bool
    #: divergence before any bounce, then after each bounce.
    divergences: tuple[float, ...] = ()
    #: per-bounce refracted leakage intensity (the outward-visible signs).
    leakage: tuple[float, ...] = ()


def reflect_on(
    sphere: PsycheSphere,
    thought: Thought,
    articulation_threshold: float,
) -> ReflectionReport:
    """Bounce a thought's beam off the concave inner surface until its
    divergence drops below the articulation threshold.

    The beam launches a quarter inner-radius off center, aimed 45 degrees
    off radial, and follows the reflected branch at every inner-surface hit;
    each bounce's refracted leakage is reported. Raises
    ``ReflectionObstructed`` if a bounce chord crosses a fracture.
    """
    if articulation_threshold <= 0.0:
        raise InvalidArgument("articulation threshold must be > 0")
    beam = compile_thought(thought, Vec3(0, 0, 0), Vec3(1, 0, 0))
    if beam.divergence < articulation_threshold:
        return ReflectionReport(0, beam.divergence, True, (beam.divergence,))

    inner = sphere.shell.inner_radius
    origin = sphere.center + Vec3(REFLECT_LAUNCH_STATION * inner, 0.0, 0.0)
    direction = Vec3(math.cos(REFLECT_LAUNCH_ANGLE), math.sin(REFLECT_LAUNCH_ANGLE), 0.0)
    launch = replace(beam, axis=Ray(origin, direction))

    limits = TraceLimits(
        max_depth=MAX_REFLECTION_BOUNCES + 2,
        min_intensity=1e-300,
    )
    segments = bundle_divergence(
        launch, [sphere.scene_entry()], limits,
        policy="reflect", plane_axis=Z_AXIS,
    )

    divergences: list[float] = []
    leakage: list[float] = []
    for seg in segments:
        if seg.event_kind == "fracture_hit":
            raise ReflectionObstructed(seg.fracture_label or "")
        if not seg.defined or seg.divergence is None:
            break
        divergences.append(seg.divergence)
        if seg.divergence < articulation_threshold:
            return ReflectionReport(seg.index, seg.divergence, True,
                                    tuple(divergences), tuple(leakage))
        if seg.index >= MAX_REFLECTION_BOUNCES:
            break
        if seg.reflectance is not None:
            leakage.append(seg.intensity * (1.0 - seg.reflectance))
    final = divergences[-1] if divergences else beam.divergence
    return ReflectionReport(
        min(len(segments) - 1, MAX_REFLECTION_BOUNCES),
        final,
        False,
        tuple(divergences),
        tuple(leakage),
    )


# ---------------------------------------------------------------------------
# Deception
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class RoutingReport:
    audience: str
    fracture_label: str
    bend_angle: float
    degenerate: bool
    pre_direction: Vec3
    post_direction: Vec3


def deception_route(
    sphere: PsycheSphere,
    thought: Thought,
    audience: Literal["self", "other"],
) -> tuple[Beam, RoutingReport]:
    """Aim the thought's beam from the core through a fracture matching the
    audience: surface fractures bend the truth toward others, interior ones
    toward oneself."""
    if audience not in ("self", "other"):
        raise InvalidArgument("audience must be 'self' or 'other'")
    placement: Placement = "surface" if audience == "other" else "interior"
    matches = sphere.fractures_by_placement(placement)
    if not matches:
        raise NoFractureError(placement)
    _, fracture = matches[0]

    direction = (fracture.center - sphere.center).normalized()
    beam = compile_thought(thought, sphere.center, direction)
    tag = "deception_other" if audience == "other" else "deception_self"
    beam = replace(beam, tag=tag)

    face = fracture.normal if fracture.normal.dot(direction) < 0.0 else -fracture.normal
    incident = angle_between(direction, -face)
    if isinstance(fracture.mode, MirrorMode):
        post = reflect(direction, face)
        degenerate = False
    elif isinstance(fracture.mode, RefractMode):
        n1 = 1.0
        n2 = n1 + fracture.mode.delta_index
        out = refract(direction, face, n1, n2) if incident > 1e-12 else direction
        post = out if out is not None else reflect(direction, face)
        degenerate = fracture.mode.delta_index == 0.0
    else:
        mode = fracture.mode
        assert isinstance(mode, ScatterMode)
        axis = direction.cross(face)
        axis = axis.normalized() if axis.length() > 1e-12 else perpendicular_to(direction)
        post = rotate_about_axis(direction, axis, mode.cone_half_angle).normalized()
        degenerate = False

    bend = angle_between(direction, post)
    report = RoutingReport(
        audience=audience,
        fracture_label=fracture.label,
        bend_angle=bend,
        degenerate=degenerate,
        pre_direction=direction,
        post_direction=post,
    )
    return beam, report


# ---------------------------------------------------------------------------
# Enlightenment
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def probe_directions(count: int = PROBE_COUNT) -> tuple[Vec3, ...]:
    """A fixed, near-uniform fan of unit directions (Fibonacci spiral)."""
    golden = math.pi * (3.0 - math.sqrt(5.0))
    out = []
    for i in range(count):
        z = 1.0 - 2.0 * (i + 0.5) / count
        r = math.sqrt(max(0.0, 1.0 - z * z))
        phi = golden * i
        out.append(Vec3(r * math.cos(phi), r * math.sin(phi), z))
    return tuple(out)


def _probe_transmission(
    sphere: PsycheSphere, direction: Vec3
) -> tuple[float, bool]:
    """(irradiance factor, crossed-a-fracture) for one radial probe from
    the emitter to the inner surface."""
    ray = Ray(sphere.center, direction)
    inner = sphere.shell.inner_radius
    factor = 1.0
    crossed = False
    for fr in sphere.fractures:
        hit = intersect_fracture(ray, fr)
        if hit is None or hit.t >= inner:
            continue
        crossed = True
        if isinstance(fr.mode, MirrorMode):
            factor = 0.0
        elif isinstance(fr.mode, ScatterMode):
            factor *= (1.0 - fr.opacity) / fr.mode.fan_count
        else:
            factor *= 1.0 - fr.opacity
    return factor, crossed


def enlightenment_score(sphere: PsycheSphere) -> float:
    """Uniformity of inner-surface irradiance times the unobstructed probe
    fraction; exactly 1 for a lit, fracture-free sphere."""
    if sphere.emitter_intensity <= 0.0:
        raise UndefinedScore("enlightenment is undefined for a dark sphere")
    irradiance = []
    obstructed = 0
    for direction in probe_directions():
        factor, crossed = _probe_transmission(sphere, direction)
        irradiance.append(sphere.emitter_intensity * factor)
        if crossed:
            obstructed += 1
    n = len(irradiance)
    mean = math.fsum(irradiance) / n
    if mean <= 0.0:
        return 0.0
    if max(irradiance) == min(irradiance):
        std = 0.0  # uniform irradiance, exactly
    else:
        variance = math.fsum((x - mean) ** 2 for x in irradiance) / n
        std = math.sqrt(variance)
    uniformity = max(0.0, min(1.0, 1.0 - std / mean))
    fraction = obstructed / n
    return max(0.0, min(1.0, uniformity * (1.0 - fraction)))


# ---------------------------------------------------------------------------
# Shadow scanning (the mindfulness report)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class ShadowRegion:
    voxels: tuple[tuple[int, int, int], ...]
    centroid: Vec3
    voxel_size: float

    @property
    def size(self) -> int:
        return len(self.voxels)


@dataclass(frozen=True, slots=True)
class MindfulnessReport:
    shadow_regions: tuple[ShadowRegion, ...]
    fractures: tuple[Fracture, ...]
    grid_resolution: int


def shadow_scan(sphere: PsycheSphere, grid_resolution: int) -> MindfulnessReport:
    """Find interior voxels no direct emitter ray can reach because an
    opaque fracture blocks the path, clustered by 6-connectivity, plus the
    full fracture inventory."""
    if not 8 <= grid_resolution <= 128:
        raise InvalidArgument("grid resolution must lie in [8, 128]")
    inner = sphere.shell.inner_radius
    center = sphere.center
    res = grid_resolution
    step = 2.0 * inner / res
    blockers = [f for f in sphere.fractures if f.opacity >= 1.0 - 1e-12]

    shadowed: set[tuple[int, int, int]] = set()
    if blockers:
        for i in range(res):
            x = center.x - inner + (i + 0.5) * step
            for j in range(res):
                y = center.y - inner + (j + 0.5) * step
                for k in range(res):
                    z = center.z - inner + (k + 0.5) * step
                    p = Vec3(x, y, z)
                    offset = p - center
                    dist = offset.length()
                    if dist >= inner or dist == 0.0:
                        continue
                    ray = Ray(center, offset * (1.0 / dist))
                    for fr in blockers:
                        hit = intersect_fracture(ray, fr)
                        if hit is not None and hit.t < dist:
                            shadowed.add((i, j, k))
                            break

    regions = []
    remaining = set(shadowed)
    while remaining:
        seed = min(remaining)
        cluster = []
        queue = deque([seed])
        remaining.discard(seed)
        while queue:
            v = queue.popleft()
            cluster.append(v)
            i, j, k = v
            for nb in ((i - 1, j, k), (i + 1, j, k), (i, j - 1, k),
                       (i, j + 1, k), (i, j, k - 1), (i, j, k + 1)):
                if nb in remaining:
                    remaining.discard(nb)
                    queue.append(nb)
        cluster.sort()
        cx = sum(v[0] for v in cluster) / len(cluster)
        cy = sum(v[1] for v in cluster) / len(cluster)
        cz = sum(v[2] for v in cluster) / len(cluster)
        centroid = Vec3(
            center.x - inner + (cx + 0.5) * step,
            center.y - inner + (cy + 0.5) * step,
            center.z - inner + (cz + 0.5) * step,
        )
        regions.append(ShadowRegion(tuple(cluster), centroid, step))
    regions.sort(key=lambda r: r.voxels[0])

    return MindfulnessReport(
        shadow_regions=tuple(regions),
        fractures=sphere.fractures,
        grid_resolution=res,
    )


# ---------------------------------------------------------------------------
# Comfort
# ---------------------------------------------------------------------------

def comfort_blur_radius(comfort: float, surface_gap: float, outer_radius: float) -> float:
    """Render-space blur radius for a pair in proximity; strictly zero for
    strangers or distant spheres, and never part of physics geometry."""
    if not 0.0 <= comfort <= 1.0:
        raise InvalidArgument("comfort must lie in [0, 1]")
    if surface_gap < 0.0:
        raise InvalidArgument("surface gap must be >= 0")
    if outer_radius <= 0.0:
        raise InvalidArgument("outer radius must be > 0")
    proximity = max(0.0, 1.0 - surface_gap / outer_radius)
    return COMFORT_BLUR_FACTOR * outer_radius * comfort * proximity
