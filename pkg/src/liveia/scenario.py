"""Scenario data model: psyches, authored beams, comfort, camera, and the
snapshot-and-branch lineage machinery.

Scenarios are immutable values; ``apply_mutation`` returns a new scenario
with the mutation appended to the log. Every stored scalar is quantized to
9 significant digits so the canonical text form is lossless over the
reachable value domain.
"""

from __future__ import annotations

import math
import uuid
from dataclasses import dataclass, replace
from typing import Optional

from .errors import (
    GeometryConflict,
    InvalidArgument,
    UnknownReference,
    ValidationFailure,
)
from .geometry import Vec3, rotate_about_axis
from .optics import Beam, WaveComponent
from .semantics import (
    ComfortRelation,
    PsycheAttributes,
    PsycheSphere,
    Thought,
    compile_psyche,
    compile_thought,
)

MUTATION_OPS = (
    "set_attribute",
    "add_psyche",
    "remove_psyche",
    "emit_beam",
    "retire_beam",
    "set_comfort",
    "reorient",
)

SCALAR_ATTRIBUTES = ("vitality", "accessibility", "depth")


def canon(x: float) -> float:
    """Quantize to 9 significant digits (the canonical document precision)."""
    if x == 0.0:
        return 0.0
    return float(f"{x:.9g}")


def canon_vec(v: Vec3) -> Vec3:
    return Vec3(canon(v.x), canon(v.y), canon(v.z))


def fresh_id() -> str:
    return uuid.uuid4().hex[:16]


# ---------------------------------------------------------------------------
# Building blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Camera:
    position: Vec3
    look_at: Vec3
    up: Vec3
    fov_degrees: float

    def __post_init__(self) -> None:
        if not 10.0 <= self.fov_degrees <= 160.0:
            raise InvalidArgument("camera fov must lie in [10, 160] degrees")
        if (self.look_at - self.position).length() == 0.0:
            raise InvalidArgument("camera cannot look at its own position")
        if self.up.length() == 0.0:
            raise InvalidArgument("camera up vector must be non-zero")


DEFAULT_CAMERA = Camera(
    position=Vec3(8.0, 0.0, 2.0),
    look_at=Vec3(0.0, 0.0, 0.0),
    up=Vec3(0.0, 0.0, 1.0),
    fov_degrees=50.0,
)


@dataclass(frozen=True, slots=True)
class PsycheSpec:
    """Authoring payload for a psyche: attributes plus placement."""

    attributes: PsycheAttributes
    position: Vec3
    outer_radius: float

    def compiled(self) -> PsycheSphere:
        return compile_psyche(self.attributes, self.position, self.outer_radius)


def spec_of(sphere: PsycheSphere) -> PsycheSpec:
    return PsycheSpec(
        attributes=sphere.attributes,
        position=sphere.shell.center,
        outer_radius=sphere.shell.outer_radius,
    )


@dataclass(frozen=True, slots=True)
class AuthoredBeam:
    """A beam emission bound to a source psyche or an external source."""

    beam_id: str
    source_psyche: Optional[str]
    origin: Optional[Vec3]
    direction: Vec3
    thought: Thought
    tag: str = "thought"

    def __post_init__(self) -> None:
        if not self.beam_id:
            raise InvalidArgument("beam id must be non-empty")
        if self.source_psyche is None and self.origin is None:
            raise InvalidArgument("external beams need an explicit origin")
        if self.source_psyche is not None and self.origin is not None:
            raise InvalidArgument("psyche-bound beams take their origin from the psyche")
        if self.direction.length() == 0.0:
            raise InvalidArgument("beam direction must be non-zero")
        from .optics import BEAM_TAGS

        if self.tag not in BEAM_TAGS:
            raise InvalidArgument(f"unknown beam tag {self.tag!r}")
        # Canonical waveform order: superposition is order-free.
        object.__setattr__(
            self, "thought",
            replace(self.thought, components=tuple(sorted(
                self.thought.components,
                key=lambda c: (c.frequency, c.amplitude, c.phase),
            ))),
        )


@dataclass(frozen=True, slots=True)
class Mutation:
    """One timeline step; ``seq`` is the logical timestamp assigned when the
    mutation is appended to a scenario's log."""

    op: str
    seq: int = 0
    psyche: Optional[str] = None
    attribute: Optional[str] = None
    value: Optional[float] = None
    new_psyche: Optional[PsycheSpec] = None
    beam: Optional[AuthoredBeam] = None
    beam_id: Optional[str] = None
    pair: Optional[tuple[str, str]] = None
    comfort: Optional[float] = None
    axis: Optional[Vec3] = None
    angle: Optional[float] = None
    pivot: Optional[Vec3] = None

    def __post_init__(self) -> None:
        if self.op not in MUTATION_OPS:
            raise InvalidArgument(f"unknown mutation op {self.op!r}")

    def summary(self) -> str:
        if self.op == "set_attribute":
            return f"set_attribute {self.psyche} {self.attribute}={self.value}"
        if self.op == "add_psyche":
            assert self.new_psyche is not None
            return f"add_psyche {self.new_psyche.attributes.name}"
        if self.op == "remove_psyche":
            return f"remove_psyche {self.psyche}"
        if self.op == "emit_beam":
            assert self.beam is not None
            return f"emit_beam {self.beam.beam_id}"
        if self.op == "retire_beam":
            return f"retire_beam {self.beam_id}"
        if self.op == "set_comfort":
            assert self.pair is not None
            return f"set_comfort {self.pair[0]}/{self.pair[1]}={self.comfort}"
        return "reorient"


@dataclass(frozen=True, slots=True)
class Scenario:
    scenario_id: str
    name: str
    psyches: tuple[PsycheSphere, ...]
    comfort: ComfortRelation
    beams: tuple[AuthoredBeam, ...]
    camera: Camera
    parent_id: Optional[str] = None
    mutation_log: tuple[Mutation, ...] = ()

    @property
    def revision(self) -> int:
        return len(self.mutation_log)

    def psyche(self, name: str) -> PsycheSphere:
        for p in self.psyches:
            if p.name == name:
                return p
        raise UnknownReference(f"unknown psyche {name!r}")

    def has_psyche(self, name: str) -> bool:
        return any(p.name == name for p in self.psyches)

    def authored_beam(self, beam_id: str) -> AuthoredBeam:
        for b in self.beams:
            if b.beam_id == beam_id:
                return b
        raise UnknownReference(f"unknown beam {beam_id!r}")

    def scene(self) -> list[tuple]:
        return [p.scene_entry() for p in self.psyches]


def make_scenario(
    name: str,
    psyches: list[PsycheSphere] | tuple[PsycheSphere, ...] = (),
    comfort: ComfortRelation | None = None,
    beams: list[AuthoredBeam] | tuple[AuthoredBeam, ...] = (),
    camera: Camera = DEFAULT_CAMERA,
    scenario_id: str = "",
    parent_id: Optional[str] = None,
    mutation_log: tuple[Mutation, ...] = (),
) -> Scenario:
    """Build a scenario with canonical ordering, then validate it."""
    s = Scenario(
        scenario_id=scenario_id,
        name=name,
        psyches=tuple(sorted(psyches, key=lambda p: p.name)),
        comfort=comfort if comfort is not None else ComfortRelation(),
        beams=tuple(sorted(beams, key=lambda b: b.beam_id)),
        camera=camera,
        parent_id=parent_id,
        mutation_log=mutation_log,
    )
    validate_scenario(s)
    return s


def validate_scenario(s: Scenario) -> None:
    """Check the cross-entity invariants; raises ValidationFailure naming
    the violated invariant."""
    names = [p.name for p in s.psyches]
    if len(names) != len(set(names)):
        raise ValidationFailure("unique-psyche-names", "psyche names must be unique")
    try:
        from .optics import validate_scene

        validate_scene(s.scene())
    except GeometryConflict as exc:
        raise ValidationFailure("sphere-overlap", str(exc)) from exc
    ids = [b.beam_id for b in s.beams]
    if len(ids) != len(set(ids)):
        raise ValidationFailure("unique-beam-ids", "beam ids must be unique")
    for b in s.beams:
        if b.source_psyche is not None and not s.has_psyche(b.source_psyche):
            raise UnknownReference(
                f"beam {b.beam_id!r} references unknown psyche {b.source_psyche!r}"
            )
    for (a, b), _ in s.comfort.items():
        for name in (a, b):
            if not s.has_psyche(name):
                raise UnknownReference(f"comfort pair references unknown psyche {name!r}")


def runtime_beam(s: Scenario, authored: AuthoredBeam) -> Beam:
    """Compile an authored emission into a traceable beam."""
    if authored.source_psyche is not None:
        origin = s.psyche(authored.source_psyche).center
    else:
        assert authored.origin is not None
        origin = authored.origin
    beam = compile_thought(authored.thought, origin, authored.direction.normalized())
    return replace(beam, tag=authored.tag)


# ---------------------------------------------------------------------------
# Mutations
# ---------------------------------------------------------------------------

def apply_mutation(s: Scenario, m: Mutation) -> Scenario:
    """Apply one mutation, returning the new scenario with the mutation
    appended to the log. On validation failure the input scenario is
    unchanged and the error names the violated invariant."""
    stamped = replace(m, seq=len(s.mutation_log) + 1)
    handler = _MUTATION_HANDLERS.get(m.op)
    if handler is None:
        raise InvalidArgument(f"unknown mutation op {m.op!r}")
    candidate = handler(s, stamped)
    candidate = replace(candidate, mutation_log=s.mutation_log + (stamped,))
    validate_scenario(candidate)
    return candidate


def _mutate_set_attribute(s: Scenario, m: Mutation) -> Scenario:
    if m.psyche is None or m.attribute is None or m.value is None:
        raise ValidationFailure("mutation-payload", "set_attribute needs psyche, attribute, value")
    target = s.psyche(m.psyche)
    attrs = target.attributes
    value = canon(m.value)
    if m.attribute in SCALAR_ATTRIBUTES:
        try:
            attrs = replace(attrs, **{m.attribute: value})
        except InvalidArgument as exc:
            raise ValidationFailure("attribute-range", str(exc)) from exc
    elif m.attribute.startswith("trait."):
        trait = m.attribute[len("trait."):]
        if not trait:
            raise ValidationFailure("mutation-payload", "empty trait name")
        traits = dict(attrs.traits)
        traits[trait] = value
        try:
            attrs = replace(attrs, traits=tuple(sorted(traits.items())))
        except InvalidArgument as exc:
            raise ValidationFailure("attribute-range", str(exc)) from exc
    else:
        raise ValidationFailure(
            "unknown-attribute",
            f"unknown attribute {m.attribute!r}; expected one of "
            f"{SCALAR_ATTRIBUTES} or trait.<name>",
        )
    rebuilt = compile_psyche(attrs, target.shell.center, target.shell.outer_radius)
    psyches = tuple(rebuilt if p.name == m.psyche else p for p in s.psyches)
    return replace(s, psyches=psyches)


def _mutate_add_psyche(s: Scenario, m: Mutation) -> Scenario:
    if m.new_psyche is None:
        raise ValidationFailure("mutation-payload", "add_psyche needs a psyche payload")
    name = m.new_psyche.attributes.name
    if s.has_psyche(name):
        raise ValidationFailure("unique-psyche-names", f"psyche {name!r} already exists")
    compiled = m.new_psyche.compiled()
    psyches = tuple(sorted(s.psyches + (compiled,), key=lambda p: p.name))
    return replace(s, psyches=psyches)


def _mutate_remove_psyche(s: Scenario, m: Mutation) -> Scenario:
    if m.psyche is None:
        raise ValidationFailure("mutation-payload", "remove_psyche needs a psyche name")
    s.psyche(m.psyche)  # raises UnknownReference when absent
    psyches = tuple(p for p in s.psyches if p.name != m.psyche)
    comfort = s.comfort.copy()
    comfort.drop_psyche(m.psyche)
    beams = tuple(b for b in s.beams if b.source_psyche != m.psyche)
    return replace(s, psyches=psyches, comfort=comfort, beams=beams)


def _mutate_emit_beam(s: Scenario, m: Mutation) -> Scenario:
    if m.beam is None:
        raise ValidationFailure("mutation-payload", "emit_beam needs a beam payload")
    if any(b.beam_id == m.beam.beam_id for b in s.beams):
        raise ValidationFailure("unique-beam-ids", f"beam {m.beam.beam_id!r} already exists")
    if m.beam.source_psyche is not None and not s.has_psyche(m.beam.source_psyche):
        raise UnknownReference(
            f"beam {m.beam.beam_id!r} references unknown psyche {m.beam.source_psyche!r}"
        )
    beams = tuple(sorted(s.beams + (m.beam,), key=lambda b: b.beam_id))
    return replace(s, beams=beams)


def _mutate_retire_beam(s: Scenario, m: Mutation) -> Scenario:
    if m.beam_id is None:
        raise ValidationFailure("mutation-payload", "retire_beam needs a beam id")
    s.authored_beam(m.beam_id)  # raises UnknownReference when absent
    beams = tuple(b for b in s.beams if b.beam_id != m.beam_id)
    return replace(s, beams=beams)


def _mutate_set_comfort(s: Scenario, m: Mutation) -> Scenario:
    if m.pair is None or m.comfort is None:
        raise ValidationFailure("mutation-payload", "set_comfort needs a pair and a value")
    for name in m.pair:
        if not s.has_psyche(name):
            raise UnknownReference(f"comfort pair references unknown psyche {name!r}")
    comfort = s.comfort.copy()
    try:
        comfort.set(m.pair[0], m.pair[1], canon(m.comfort))
    except InvalidArgument as exc:
        raise ValidationFailure("comfort-range", str(exc)) from exc
    return replace(s, comfort=comfort)


def _mutate_reorient(s: Scenario, m: Mutation) -> Scenario:
    if m.axis is None or m.angle is None or m.pivot is None:
        raise ValidationFailure("mutation-payload", "reorient needs axis, angle, pivot")
    return replace(s, camera=reoriented_camera(s.camera, m.axis, m.angle, m.pivot))


_MUTATION_HANDLERS = {
    "set_attribute": _mutate_set_attribute,
    "add_psyche": _mutate_add_psyche,
    "remove_psyche": _mutate_remove_psyche,
    "emit_beam": _mutate_emit_beam,
    "retire_beam": _mutate_retire_beam,
    "set_comfort": _mutate_set_comfort,
    "reorient": _mutate_reorient,
}


def reoriented_camera(camera: Camera, axis: Vec3, angle: float, pivot: Vec3) -> Camera:
    """Rigid rotation of the camera about ``pivot``; the look-at target is
    kept, so the camera re-aims at the same scene point. Scene geometry is
    untouched, which is what keeps every trace and metric invariant."""
    u = axis.normalized()
    position = rotate_about_axis(camera.position - pivot, u, angle) + pivot
    up = rotate_about_axis(camera.up, u, angle)
    return Camera(
        position=canon_vec(position),
        look_at=camera.look_at,
        up=canon_vec(up),
        fov_degrees=camera.fov_degrees,
    )


def reorient(s: Scenario, axis: Vec3, angle: float, pivot: Vec3) -> Scenario:
    """Convenience wrapper: apply a reorient mutation."""
    return apply_mutation(s, Mutation(
        op="reorient", axis=canon_vec(axis), angle=canon(angle), pivot=canon_vec(pivot),
    ))


# ---------------------------------------------------------------------------
# Lineage
# ---------------------------------------------------------------------------

def branch(s: Scenario, new_name: str, new_id: str | None = None) -> Scenario:
    """Deep copy with fresh identity: lineage points at the parent and the
    child starts with an empty mutation log. Scenario values are immutable,
    so the parent can never observe child mutations."""
    return replace(
        s,
        scenario_id=new_id if new_id is not None else fresh_id(),
        name=new_name,
        parent_id=s.scenario_id,
        mutation_log=(),
    )


def replay(parent: Scenario, log: tuple[Mutation, ...]) -> Scenario:
    """Re-apply a mutation log on top of a parent snapshot."""
    current = parent
    for m in log:
        current = apply_mutation(current, m)
    return current


def equivalent(a: Scenario, b: Scenario, ignore_identity: bool = True) -> bool:
    """Field equality, optionally ignoring the generated scenario id."""
    if ignore_identity:
        a = replace(a, scenario_id=b.scenario_id)
    return a == b


# ---------------------------------------------------------------------------
# Authoring helpers (canonical-valued constructors)
# ---------------------------------------------------------------------------

def build_psyche_spec(
    name: str,
    position: Vec3,
    outer_radius: float,
    vitality: float,
    accessibility: float,
    depth: float,
    traits: dict[str, float] | None = None,
    shadow_aspects: tuple = (),
) -> PsycheSpec:
    attrs = PsycheAttributes(
        name=name,
        vitality=canon(vitality),
        accessibility=canon(accessibility),
        depth=canon(depth),
        traits=tuple((t, canon(v)) for t, v in (traits or {}).items()),
        shadow_aspects=shadow_aspects,
    )
    return PsycheSpec(attrs, canon_vec(position), canon(outer_radius))


def build_beam(
    beam_id: str,
    direction: Vec3,
    valence: float,
    clarity: float,
    components: tuple[WaveComponent, ...],
    tag: str = "thought",
    source_psyche: str | None = None,
    origin: Vec3 | None = None,
) -> AuthoredBeam:
    return AuthoredBeam(
        beam_id=beam_id,
        source_psyche=source_psyche,
        origin=canon_vec(origin) if origin is not None else None,
        direction=canon_vec(direction.normalized()),
        thought=Thought(
            valence=canon(valence),
            clarity=canon(clarity),
            components=tuple(
                WaveComponent(canon(c.frequency), canon(c.amplitude), canon(c.phase))
                for c in components
            ),
        ),
        tag=tag,
    )
