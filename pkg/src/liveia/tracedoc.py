"""Structured trace export: the schema-versioned document that carries
beam trace trees plus the per-psyche metric block to external viewers.

The on-disk form is canonical JSON (sorted keys, one-space indent, LF
endings), so write -> read -> write is byte-identical.
"""

from __future__ import annotations

import json
from typing import Any

from .errors import InvalidArgument, UndefinedScore
from .geometry import Vec3
from .optics import (
    MirrorMode,
    RefractMode,
    ScatterMode,
    TraceLimits,
    TraceNode,
    TraceTree,
    trace_beam,
)
from .scenario import Scenario, runtime_beam
from .semantics import enlightenment_score, shadow_scan

SCHEMA = "liveia.trace/1"
DEFAULT_SHADOW_GRID = 32


def _vec(v: Vec3) -> list[float]:
    return [v.x, v.y, v.z]


def _node_payload(node: TraceNode) -> dict[str, Any]:
    event: dict[str, Any] = {
        "kind": node.event.kind,
        "position": _vec(node.event.position),
        "normal": _vec(node.event.normal),
        "incident_angle": node.event.incident_angle,
        "exit_angle": node.event.exit_angle,
    }
    if node.event.fracture_label is not None:
        event["fracture"] = node.event.fracture_label
    return {
        "start": _vec(node.start),
        "end": _vec(node.end),
        "medium": node.medium_index,
        "intensity": node.intensity,
        "terminal_intensity": node.terminal_intensity,
        "branch": node.branch,
        "event": event,
        "children": [_node_payload(c) for c in node.children],
    }


def _mode_payload(mode) -> dict[str, Any]:
    if isinstance(mode, MirrorMode):
        return {"kind": "mirror"}
    if isinstance(mode, RefractMode):
        return {"kind": "refract", "delta_index": mode.delta_index}
    assert isinstance(mode, ScatterMode)
    return {"kind": "scatter", "fan_count": mode.fan_count,
            "cone_half_angle": mode.cone_half_angle}


def build_trace_document(
    s: Scenario,
    limits: TraceLimits | None = None,
    shadow_grid: int = DEFAULT_SHADOW_GRID,
) -> dict[str, Any]:
    """Trace every authored beam and attach the per-psyche metrics."""
    if limits is None:
        limits = TraceLimits()
    scene = s.scene()
    beams = []
    for authored in s.beams:
        beam = runtime_beam(s, authored)
        tree = trace_beam(scene, beam, limits)
        summary = tree.energy_summary()
        beams.append({
            "beam_id": authored.beam_id,
            "tag": beam.tag,
            "divergence": beam.divergence,
            "intensity": beam.intensity,
            "energy": {
                "escaped": summary.escaped,
                "absorbed": summary.absorbed,
                "cutoff": summary.cutoff,
            },
            "root": _node_payload(tree.root),
        })

    metrics: dict[str, Any] = {}
    for psyche in s.psyches:
        try:
            score: float | None = enlightenment_score(psyche)
        except UndefinedScore:
            score = None
        report = shadow_scan(psyche, shadow_grid)
        aspects = {a.label: a for a in psyche.attributes.shadow_aspects}
        metrics[psyche.name] = {
            "enlightenment": score,
            "fractures": [
                {
                    "label": f.label,
                    "placement": aspects[f.label].placement if f.label in aspects else None,
                    "radius": f.radius,
                    "opacity": f.opacity,
                    "center": _vec(f.center),
                    "mode": _mode_payload(f.mode),
                }
                for f in report.fractures
            ],
            "shadow_clusters": [
                {
                    "size": region.size,
                    "centroid": _vec(region.centroid),
                    "voxel_size": region.voxel_size,
                }
                for region in report.shadow_regions
            ],
            "grid_resolution": report.grid_resolution,
        }

    return {
        "schema": SCHEMA,
        "scenario": {
            "id": s.scenario_id,
            "name": s.name,
            "revision": s.revision,
        },
        "beams": beams,
        "metrics": metrics,
    }


def document_to_text(doc: dict[str, Any]) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=True) + "\n"


def text_to_document(text: str) -> dict[str, Any]:
    doc = json.loads(text)
    if not isinstance(doc, dict) or doc.get("schema") != SCHEMA:
        raise InvalidArgument(f"not a {SCHEMA} document")
    return doc


def export_trace(s: Scenario, limits: TraceLimits | None = None,
                 shadow_grid: int = DEFAULT_SHADOW_GRID) -> str:
    return document_to_text(build_trace_document(s, limits, shadow_grid))


def count_document_nodes(doc: dict[str, Any]) -> int:
    def count(node: dict[str, Any]) -> int:
        return 1 + sum(count(c) for c in node["children"])

    return sum(count(b["root"]) for b in doc["beams"])


def count_tree_nodes(tree: TraceTree) -> int:
    return sum(1 for _ in tree.iter_nodes())
