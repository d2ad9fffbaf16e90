"""Randomized-but-valid scenario generator shared by the DSL, store and
acceptance suites. Everything routes through the canonical-valued builders,
so generated scenarios live in the 9-significant-digit value domain the
document format is lossless over."""

from __future__ import annotations

import random

from liveia.geometry import Vec3
from liveia.optics import MirrorMode, RefractMode, ScatterMode, WaveComponent
from liveia.scenario import (
    Camera,
    Mutation,
    Scenario,
    apply_mutation,
    build_beam,
    build_psyche_spec,
    canon,
    canon_vec,
    make_scenario,
)
from liveia.semantics import ComfortRelation, ShadowAspect

TRAIT_NAMES = ("curiosity", "warmth", "humor", "patience", "candor",
               "skepticism", "driftwood", "moxie")
LABELS = ("guilt", "denial", "regret", "envy", "doubt", "grudge")


def rand_unit(rng: random.Random) -> Vec3:
    while True:
        v = Vec3(rng.gauss(0, 1), rng.gauss(0, 1), rng.gauss(0, 1))
        if v.length() > 1e-6:
            return v.normalized()


def random_shadow(rng: random.Random, label: str) -> ShadowAspect:
    mode = None
    roll = rng.random()
    if roll < 0.25:
        mode = MirrorMode()
    elif roll < 0.5:
        mode = RefractMode(delta_index=canon(rng.uniform(0.0, 0.5)))
    elif roll < 0.7:
        mode = ScatterMode(fan_count=rng.choice((3, 5, 7)),
                           cone_half_angle=canon(rng.uniform(0.1, 1.0)))
    opacity = canon(rng.random()) if rng.random() < 0.5 else None
    return ShadowAspect(
        label=label,
        severity=canon(rng.uniform(0.05, 1.0)),
        placement=rng.choice(("surface", "interior")),
        mode_override=mode,
        opacity_override=opacity,
    )


def random_scenario(rng: random.Random, with_lineage: bool = True) -> Scenario:
    n_psyches = rng.randint(0, 3)
    stations = [Vec3(-6.0, 0, 0), Vec3(0.0, 0, 0), Vec3(6.0, 0, 0), Vec3(0.0, 6.0, 0)]
    names = rng.sample(("alice", "bob", "carol", "dmitri"), k=n_psyches)
    specs = []
    for i, name in enumerate(sorted(names)):
        traits = {
            t: rng.random()
            for t in rng.sample(TRAIT_NAMES, k=rng.randint(0, 3))
        }
        shadows = tuple(
            random_shadow(rng, label)
            for label in rng.sample(LABELS, k=rng.randint(0, 2))
        )
        jitter = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5),
                      rng.uniform(-0.5, 0.5))
        specs.append(build_psyche_spec(
            name=name,
            position=canon_vec(stations[i] + jitter),
            outer_radius=rng.uniform(0.5, 1.5),
            vitality=rng.random(),
            accessibility=rng.random(),
            depth=rng.random(),
            traits=traits,
            shadow_aspects=shadows,
        ))

    comfort = ComfortRelation()
    if len(specs) >= 2 and rng.random() < 0.7:
        a, b = rng.sample([s.attributes.name for s in specs], k=2)
        comfort.set(a, b, canon(rng.uniform(0.01, 1.0)))

    beams = []
    for k in range(rng.randint(0, 2)):
        components = tuple(
            WaveComponent(rng.uniform(0.5, 8.0), rng.uniform(0.1, 2.0),
                          rng.uniform(0.0, 6.28))
            for _ in range(rng.randint(1, 3))
        )
        if specs and rng.random() < 0.7:
            beams.append(build_beam(
                beam_id=f"t{k}",
                direction=rand_unit(rng),
                valence=rng.uniform(-1, 1),
                clarity=rng.random(),
                components=components,
                tag=rng.choice(("thought", "probe", "deception_self")),
                source_psyche=rng.choice(specs).attributes.name,
            ))
        else:
            beams.append(build_beam(
                beam_id=f"x{k}",
                direction=rand_unit(rng),
                valence=rng.uniform(-1, 1),
                clarity=rng.random(),
                components=components,
                tag="percept",
                origin=canon_vec(Vec3(rng.uniform(5, 9), rng.uniform(-3, 3),
                                      rng.uniform(-3, 3))),
            ))

    camera = Camera(
        position=canon_vec(Vec3(rng.uniform(6, 12), rng.uniform(-4, 4),
                                rng.uniform(0, 4))),
        look_at=canon_vec(Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), 0.0)),
        up=canon_vec(rand_unit(rng)),
        fov_degrees=canon(rng.uniform(30, 90)),
    )

    scenario = make_scenario(
        name=rng.choice(("study", "argument", "reunion", "what-if")),
        psyches=[s.compiled() for s in specs],
        comfort=comfort,
        beams=beams,
        camera=camera,
        scenario_id=f"{rng.getrandbits(64):016x}",
        parent_id=f"{rng.getrandbits(64):016x}" if with_lineage and rng.random() < 0.5 else None,
    )

    if with_lineage:
        for m in random_mutations(rng, scenario, rng.randint(0, 4)):
            scenario = apply_mutation(scenario, m)
    return scenario


def random_mutations(rng: random.Random, scenario: Scenario, count: int) -> list[Mutation]:
    """A sequence of mutations, each valid against the evolving state."""
    out: list[Mutation] = []
    current = scenario
    attempts = 0
    while len(out) < count and attempts < count * 8:
        attempts += 1
        m = _candidate_mutation(rng, current)
        if m is None:
            continue
        try:
            current = apply_mutation(current, m)
        except Exception:
            continue
        out.append(m)
    return out


def _candidate_mutation(rng: random.Random, s: Scenario):
    ops = ["reorient", "set_attribute", "add_psyche", "set_comfort",
           "emit_beam", "retire_beam", "remove_psyche"]
    op = rng.choice(ops)
    names = [p.name for p in s.psyches]
    if op == "reorient":
        return Mutation(op="reorient", axis=canon_vec(rand_unit(rng)),
                        angle=canon(rng.uniform(-3.0, 3.0)),
                        pivot=canon_vec(Vec3(0, 0, 0)))
    if op == "set_attribute" and names:
        attr = rng.choice(("vitality", "accessibility", "depth", "trait.spark"))
        return Mutation(op="set_attribute", psyche=rng.choice(names),
                        attribute=attr, value=canon(rng.random()))
    if op == "add_psyche" and len(names) < 4:
        free = [n for n in ("alice", "bob", "carol", "dmitri", "edda") if n not in names]
        if not free:
            return None
        spec = build_psyche_spec(
            name=rng.choice(free),
            position=Vec3(rng.choice((-12.0, 12.0)), rng.uniform(-2, 2), 0.0),
            outer_radius=rng.uniform(0.5, 1.2),
            vitality=rng.random(), accessibility=rng.random(), depth=rng.random(),
        )
        return Mutation(op="add_psyche", new_psyche=spec)
    if op == "set_comfort" and len(names) >= 2:
        a, b = rng.sample(names, k=2)
        return Mutation(op="set_comfort", pair=(a, b), comfort=canon(rng.random()))
    if op == "emit_beam" and names:
        beam = build_beam(
            beam_id=f"m{rng.getrandbits(24):06x}",
            direction=rand_unit(rng),
            valence=rng.uniform(-1, 1),
            clarity=rng.random(),
            components=(WaveComponent(1.0, 1.0, 0.0),),
            source_psyche=rng.choice(names),
        )
        return Mutation(op="emit_beam", beam=beam)
    if op == "retire_beam" and s.beams:
        return Mutation(op="retire_beam", beam_id=rng.choice(s.beams).beam_id)
    if op == "remove_psyche" and len(names) > 1:
        return Mutation(op="remove_psyche", psyche=rng.choice(names))
    return None
