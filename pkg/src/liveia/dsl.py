"""The scenario description language: a small recursive-descent parser and
the canonical serializer.

Documents are UTF-8, LF-terminated, ``#``-commented. The canonical form has
a fixed block order, fixed key order, sorted collections, 2-space indents
and reals printed at 9 significant digits; ``parse(serialize(s))`` is
field-identical to ``s`` and ``serialize(parse(d))`` is byte-identical for
canonical ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DslError, InvalidArgument, ValidationFailure
from .geometry import Vec3
from .optics import (
    BEAM_TAGS,
    Fracture,
    MirrorMode,
    RefractMode,
    ScatterMode,
    WaveComponent,
)
from .scenario import (
    AuthoredBeam,
    Camera,
    DEFAULT_CAMERA,
    Mutation,
    PsycheSpec,
    Scenario,
    canon,
    make_scenario,
)
from .semantics import ComfortRelation, PsycheAttributes, ShadowAspect, Thought

HEADER = "liveia 1"
DOCUMENT_VERSION = 1


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class _Token:
    kind: str  # string | number | ident | lbrace | rbrace | eof
    text: str
    line: int
    column: int


_IDENT_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-")
_NUMBER_START = set("0123456789+-.")


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if ch == "{":
            tokens.append(_Token("lbrace", "{", start_line, start_col))
            i += 1
            col += 1
            continue
        if ch == "}":
            tokens.append(_Token("rbrace", "}", start_line, start_col))
            i += 1
            col += 1
            continue
        if ch == '"':
            i += 1
            col += 1
            out = []
            while True:
                if i >= n or text[i] == "\n":
                    raise DslError("unterminated string", start_line, start_col)
                c = text[i]
                if c == '"':
                    i += 1
                    col += 1
                    break
                if c == "\\":
                    if i + 1 >= n or text[i + 1] not in ('"', "\\"):
                        raise DslError("bad string escape", line, col)
                    out.append(text[i + 1])
                    i += 2
                    col += 2
                    continue
                out.append(c)
                i += 1
                col += 1
            tokens.append(_Token("string", "".join(out), start_line, start_col))
            continue
        if ch in _NUMBER_START and (ch not in "+-." or
                                    (i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == "."))):
            j = i
            while j < n and text[j] in "0123456789+-.eE":
                # '+'/'-' only at the start or after an exponent marker.
                if text[j] in "+-" and j > i and text[j - 1] not in "eE":
                    break
                j += 1
            word = text[i:j]
            try:
                float(word)
            except ValueError:
                raise DslError(f"malformed number {word!r}", start_line, start_col)
            tokens.append(_Token("number", word, start_line, start_col))
            col += j - i
            i = j
            continue
        if ch in _IDENT_CHARS:
            j = i
            while j < n and text[j] in _IDENT_CHARS:
                j += 1
            tokens.append(_Token("ident", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        raise DslError(f"unexpected character {ch!r}", start_line, start_col)
    tokens.append(_Token("eof", "", line, col))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _lex(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: _Token | None = None) -> DslError:
        tok = tok or self.peek()
        return DslError(message, tok.line, tok.column)

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.next()
        if tok.kind != kind:
            raise DslError(f"expected {what}, got {tok.text or tok.kind!r}",
                           tok.line, tok.column)
        return tok

    def expect_keyword(self, word: str) -> _Token:
        tok = self.next()
        if tok.kind != "ident" or tok.text != word:
            raise DslError(f"expected {word!r}, got {tok.text or tok.kind!r}",
                           tok.line, tok.column)
        return tok

    def string(self, what: str) -> str:
        return self.expect("string", f"{what} (a quoted string)").text

    def number(self, what: str) -> float:
        tok = self.expect("number", f"{what} (a number)")
        return canon(float(tok.text))

    def integer(self, what: str) -> int:
        tok = self.expect("number", f"{what} (an integer)")
        value = float(tok.text)
        if not value.is_integer():
            raise DslError(f"{what} must be an integer", tok.line, tok.column)
        return int(value)

    def vec3(self, what: str) -> Vec3:
        return Vec3(self.number(f"{what} x"), self.number(f"{what} y"),
                    self.number(f"{what} z"))

    def guarded(self, build, what: str, tok: _Token):
        """Run a constructor, converting range errors into located errors."""
        try:
            return build()
        except (InvalidArgument, ValidationFailure) as exc:
            raise DslError(f"{what}: {exc}", tok.line, tok.column) from exc


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario document; lexical, syntax and semantic errors carry
    the offending line and column."""
    p = _Parser(text)
    header = p.expect_keyword("liveia")
    version = p.integer("document version")
    if version != DOCUMENT_VERSION:
        raise DslError(f"unsupported document version {version}", header.line, header.column)
    p.expect_keyword("scenario")
    name = p.string("scenario name")
    p.expect("lbrace", "'{'")

    scenario_id = ""
    camera = DEFAULT_CAMERA
    specs: list[tuple[PsycheSpec, _Token]] = []
    comforts: list[tuple[str, str, float, _Token]] = []
    beams: list[AuthoredBeam] = []
    parent_id: str | None = None
    mutations: list[Mutation] = []

    while True:
        tok = p.peek()
        if tok.kind == "rbrace":
            p.next()
            break
        if tok.kind != "ident":
            raise p.fail(f"expected a statement, got {tok.text or tok.kind!r}")
        keyword = tok.text
        if keyword == "id":
            p.next()
            scenario_id = p.string("scenario id")
        elif keyword == "camera":
            p.next()
            camera = _parse_camera(p, tok)
        elif keyword == "psyche":
            p.next()
            specs.append((_parse_psyche(p), tok))
        elif keyword == "comfort":
            p.next()
            a = p.string("comfort psyche")
            b = p.string("comfort psyche")
            value = p.number("comfort value")
            if not 0.0 <= value <= 1.0:
                raise DslError(f"comfort value {value:g} out of range [0, 1]",
                               tok.line, tok.column)
            comforts.append((a, b, value, tok))
        elif keyword == "thought":
            p.next()
            beams.append(_parse_thought(p, tok))
        elif keyword == "lineage":
            p.next()
            parent_id, mutations = _parse_lineage(p, tok)
        else:
            raise p.fail(f"unknown statement {keyword!r} in scenario block", tok)

    tok = p.peek()
    if tok.kind != "eof":
        raise p.fail("trailing content after the scenario block")

    # Name-aware duplicate and overlap checks before the compile step so the
    # error can point at the construct.
    seen: dict[str, _Token] = {}
    for spec, at in specs:
        pname = spec.attributes.name
        if pname in seen:
            raise DslError(f"duplicate psyche {pname!r}", at.line, at.column)
        seen[pname] = at
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            a, at = specs[i]
            b, _ = specs[j]
            gap = a.position.distance_to(b.position) - (a.outer_radius + b.outer_radius)
            if gap < -1e-9:
                raise DslError(
                    f"psyche {b.attributes.name!r} overlaps {a.attributes.name!r} "
                    f"(surface gap {gap:.3g})",
                    at.line, at.column,
                )

    comfort = ComfortRelation()
    names = {spec.attributes.name for spec, _ in specs}
    for a, b, value, at in comforts:
        for pname in (a, b):
            if pname not in names:
                raise DslError(f"comfort references unknown psyche {pname!r}",
                               at.line, at.column)
        try:
            comfort.set(a, b, value)
        except InvalidArgument as exc:
            raise DslError(f"comfort: {exc}", at.line, at.column) from exc

    def build():
        return make_scenario(
            name=name,
            psyches=[spec.compiled() for spec, _ in specs],
            comfort=comfort,
            beams=beams,
            camera=camera,
            scenario_id=scenario_id,
            parent_id=parent_id,
            mutation_log=tuple(mutations),
        )

    return p.guarded(build, "scenario", p.tokens[0])


def _parse_camera(p: _Parser, at: _Token) -> Camera:
    p.expect("lbrace", "'{'")
    position = look_at = up = None
    fov = None
    while True:
        tok = p.peek()
        if tok.kind == "rbrace":
            p.next()
            break
        if tok.kind != "ident":
            raise p.fail("expected a camera statement")
        p.next()
        if tok.text == "position":
            position = p.vec3("camera position")
        elif tok.text == "look_at":
            look_at = p.vec3("camera look_at")
        elif tok.text == "up":
            up = p.vec3("camera up")
        elif tok.text == "fov":
            fov = p.number("camera fov")
        else:
            raise p.fail(f"unknown statement {tok.text!r} in camera block", tok)
    if position is None or look_at is None or up is None or fov is None:
        raise DslError("camera block needs position, look_at, up and fov",
                       at.line, at.column)
    return p.guarded(lambda: Camera(position, look_at, up, fov), "camera", at)


def _parse_psyche(p: _Parser) -> PsycheSpec:
    name_tok = p.peek()
    name = p.string("psyche name")
    p.expect("lbrace", "'{'")
    position = None
    radius = None
    scalars: dict[str, float] = {}
    traits: list[tuple[str, float]] = []
    shadows: list[ShadowAspect] = []
    while True:
        tok = p.peek()
        if tok.kind == "rbrace":
            p.next()
            break
        if tok.kind != "ident":
            raise p.fail("expected a psyche statement")
        p.next()
        if tok.text == "position":
            position = p.vec3("position")
        elif tok.text == "radius":
            radius = p.number("radius")
        elif tok.text in ("vitality", "accessibility", "depth"):
            scalars[tok.text] = p.number(tok.text)
        elif tok.text == "trait":
            trait_name = p.string("trait name")
            traits.append((trait_name, p.number("trait strength")))
        elif tok.text == "shadow":
            shadows.append(_parse_shadow(p, tok))
        else:
            raise p.fail(f"unknown statement {tok.text!r} in psyche block", tok)
    if position is None or radius is None:
        raise DslError(f"psyche {name!r} needs position and radius",
                       name_tok.line, name_tok.column)
    missing = [k for k in ("vitality", "accessibility", "depth") if k not in scalars]
    if missing:
        raise DslError(f"psyche {name!r} is missing {', '.join(missing)}",
                       name_tok.line, name_tok.column)

    def build():
        attrs = PsycheAttributes(
            name=name,
            vitality=scalars["vitality"],
            accessibility=scalars["accessibility"],
            depth=scalars["depth"],
            traits=tuple(traits),
            shadow_aspects=tuple(shadows),
        )
        return PsycheSpec(attrs, position, radius)

    return p.guarded(build, f"psyche {name!r}", name_tok)


def _parse_shadow(p: _Parser, at: _Token) -> ShadowAspect:
    label = p.string("shadow label")
    p.expect_keyword("severity")
    severity = p.number("shadow severity")
    p.expect_keyword("placement")
    placement_tok = p.expect("ident", "placement (surface or interior)")
    placement = placement_tok.text
    mode = None
    opacity = None
    while p.peek().kind == "ident" and p.peek().text in ("mode", "opacity"):
        word = p.next().text
        if word == "mode":
            mode_tok = p.expect("ident", "fracture mode")
            if mode_tok.text == "mirror":
                mode = MirrorMode()
            elif mode_tok.text == "refract":
                delta = p.number("delta index")
                mode = p.guarded(lambda: RefractMode(delta), "shadow mode", mode_tok)
            elif mode_tok.text == "scatter":
                fan = p.integer("fan count")
                cone = p.number("cone half-angle")
                mode = p.guarded(lambda: ScatterMode(fan, cone), "shadow mode", mode_tok)
            else:
                raise DslError(f"unknown fracture mode {mode_tok.text!r}",
                               mode_tok.line, mode_tok.column)
        else:
            opacity = p.number("shadow opacity")

    def build():
        return ShadowAspect(
            label=label,
            severity=severity,
            placement=placement,  # type: ignore[arg-type]
            mode_override=mode,
            opacity_override=opacity,
        )

    return p.guarded(build, f"shadow {label!r}", at)


def _parse_thought(p: _Parser, at: _Token) -> AuthoredBeam:
    beam_id = p.string("thought id")
    kind_tok = p.expect("ident", "'from' or 'external'")
    source = None
    if kind_tok.text == "from":
        source = p.string("source psyche")
    elif kind_tok.text != "external":
        raise DslError("expected 'from <psyche>' or 'external'",
                       kind_tok.line, kind_tok.column)
    p.expect("lbrace", "'{'")
    origin = None
    direction = None
    valence = None
    clarity = None
    components: list[WaveComponent] = []
    tag = "thought"
    while True:
        tok = p.peek()
        if tok.kind == "rbrace":
            p.next()
            break
        if tok.kind != "ident":
            raise p.fail("expected a thought statement")
        p.next()
        if tok.text == "origin":
            origin = p.vec3("origin")
        elif tok.text == "direction":
            direction = p.vec3("direction")
        elif tok.text == "valence":
            valence = p.number("valence")
        elif tok.text == "clarity":
            clarity = p.number("clarity")
        elif tok.text == "component":
            freq = p.number("component frequency")
            amp = p.number("component amplitude")
            phase = p.number("component phase")
            components.append(p.guarded(
                lambda: WaveComponent(freq, amp, phase), "waveform component", tok))
        elif tok.text == "tag":
            tag_tok = p.expect("ident", "beam tag")
            if tag_tok.text not in BEAM_TAGS:
                raise DslError(f"unknown beam tag {tag_tok.text!r}",
                               tag_tok.line, tag_tok.column)
            tag = tag_tok.text
        else:
            raise p.fail(f"unknown statement {tok.text!r} in thought block", tok)
    if direction is None or valence is None or clarity is None:
        raise DslError(f"thought {beam_id!r} needs direction, valence and clarity",
                       at.line, at.column)
    if source is None and origin is None:
        raise DslError(f"external thought {beam_id!r} needs an origin",
                       at.line, at.column)

    def build():
        return AuthoredBeam(
            beam_id=beam_id,
            source_psyche=source,
            origin=origin if source is None else None,
            direction=direction,
            thought=Thought(valence=valence, clarity=clarity,
                            components=tuple(components)),
            tag=tag,
        )

    return p.guarded(build, f"thought {beam_id!r}", at)


def _parse_lineage(p: _Parser, at: _Token) -> tuple[str | None, list[Mutation]]:
    p.expect("lbrace", "'{'")
    parent = None
    mutations: list[Mutation] = []
    while True:
        tok = p.peek()
        if tok.kind == "rbrace":
            p.next()
            break
        if tok.kind != "ident":
            raise p.fail("expected a lineage statement")
        p.next()
        if tok.text == "parent":
            parent = p.string("parent id")
        elif tok.text == "mutation":
            mutations.append(_parse_mutation(p, tok))
        else:
            raise p.fail(f"unknown statement {tok.text!r} in lineage block", tok)
    for i, m in enumerate(mutations):
        if m.seq != i + 1:
            raise DslError(
                f"mutation sequence must be contiguous from 1, got {m.seq} at index {i}",
                at.line, at.column,
            )
    return parent, mutations


def _parse_mutation(p: _Parser, at: _Token) -> Mutation:
    seq = p.integer("mutation sequence")
    op_tok = p.expect("ident", "mutation op")
    op = op_tok.text
    if op == "set_attribute":
        psyche = p.string("psyche name")
        attribute = p.string("attribute name")
        value = p.number("attribute value")
        return Mutation(op=op, seq=seq, psyche=psyche, attribute=attribute, value=value)
    if op == "add_psyche":
        p.expect_keyword("psyche")
        spec = _parse_psyche(p)
        return Mutation(op=op, seq=seq, new_psyche=spec)
    if op == "remove_psyche":
        return Mutation(op=op, seq=seq, psyche=p.string("psyche name"))
    if op == "emit_beam":
        p.expect_keyword("thought")
        beam = _parse_thought(p, at)
        return Mutation(op=op, seq=seq, beam=beam)
    if op == "retire_beam":
        return Mutation(op=op, seq=seq, beam_id=p.string("beam id"))
    if op == "set_comfort":
        a = p.string("comfort psyche")
        b = p.string("comfort psyche")
        value = p.number("comfort value")
        return Mutation(op=op, seq=seq, pair=(a, b), comfort=value)
    if op == "reorient":
        p.expect_keyword("axis")
        axis = p.vec3("axis")
        p.expect_keyword("angle")
        angle = p.number("angle")
        p.expect_keyword("pivot")
        pivot = p.vec3("pivot")
        if abs(axis.length() - 1.0) > 1e-6:
            raise DslError("reorient axis must be unit length", at.line, at.column)
        return Mutation(op=op, seq=seq, axis=axis, angle=angle, pivot=pivot)
    raise DslError(f"unknown mutation op {op!r}", op_tok.line, op_tok.column)


# ---------------------------------------------------------------------------
# Serializer
# ---------------------------------------------------------------------------

def _num(x: float) -> str:
    if x == 0.0:
        return "0"
    return f"{x:.9g}"


def _vec(v: Vec3) -> str:
    return f"{_num(v.x)} {_num(v.y)} {_num(v.z)}"


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_scenario(s: Scenario) -> str:
    """Canonical text form: fixed block and key order, sorted collections,
    9-significant-digit reals, LF endings."""
    out: list[str] = [HEADER]
    out.append(f"scenario {_quote(s.name)} {{")
    if s.scenario_id:
        out.append(f"  id {_quote(s.scenario_id)}")
    cam = s.camera
    out.append("  camera {")
    out.append(f"    position {_vec(cam.position)}")
    out.append(f"    look_at {_vec(cam.look_at)}")
    out.append(f"    up {_vec(cam.up)}")
    out.append(f"    fov {_num(cam.fov_degrees)}")
    out.append("  }")
    for psyche in sorted(s.psyches, key=lambda p: p.name):
        _write_psyche(out, spec_lines(psyche), indent=1)
    for (a, b), value in s.comfort.items():
        out.append(f"  comfort {_quote(a)} {_quote(b)} {_num(value)}")
    for beam in sorted(s.beams, key=lambda b: b.beam_id):
        _write_thought(out, beam, indent=1)
    if s.parent_id or s.mutation_log:
        out.append("  lineage {")
        if s.parent_id:
            out.append(f"    parent {_quote(s.parent_id)}")
        for m in s.mutation_log:
            _write_mutation(out, m, indent=2)
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


def spec_lines(p) -> tuple[str, Vec3, float, PsycheAttributes]:
    if isinstance(p, PsycheSpec):
        return (p.attributes.name, p.position, p.outer_radius, p.attributes)
    return (p.name, p.shell.center, p.shell.outer_radius, p.attributes)


def _write_psyche(out: list[str], spec, indent: int) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    name, position, radius, attrs = spec
    out.append(f"{pad}psyche {_quote(name)} {{")
    out.append(f"{inner}position {_vec(position)}")
    out.append(f"{inner}radius {_num(radius)}")
    out.append(f"{inner}vitality {_num(attrs.vitality)}")
    out.append(f"{inner}accessibility {_num(attrs.accessibility)}")
    out.append(f"{inner}depth {_num(attrs.depth)}")
    for trait, strength in attrs.traits:
        out.append(f"{inner}trait {_quote(trait)} {_num(strength)}")
    for aspect in attrs.shadow_aspects:
        line = (f"{inner}shadow {_quote(aspect.label)} severity {_num(aspect.severity)} "
                f"placement {aspect.placement}")
        if aspect.mode_override is not None:
            mode = aspect.mode_override
            if isinstance(mode, MirrorMode):
                line += " mode mirror"
            elif isinstance(mode, RefractMode):
                line += f" mode refract {_num(mode.delta_index)}"
            else:
                assert isinstance(mode, ScatterMode)
                line += f" mode scatter {mode.fan_count} {_num(mode.cone_half_angle)}"
        if aspect.opacity_override is not None:
            line += f" opacity {_num(aspect.opacity_override)}"
        out.append(line)
    out.append(f"{pad}}}")


def _write_thought(out: list[str], beam: AuthoredBeam, indent: int) -> None:
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if beam.source_psyche is not None:
        out.append(f"{pad}thought {_quote(beam.beam_id)} from {_quote(beam.source_psyche)} {{")
    else:
        out.append(f"{pad}thought {_quote(beam.beam_id)} external {{")
        assert beam.origin is not None
        out.append(f"{inner}origin {_vec(beam.origin)}")
    out.append(f"{inner}direction {_vec(beam.direction)}")
    out.append(f"{inner}valence {_num(beam.thought.valence)}")
    out.append(f"{inner}clarity {_num(beam.thought.clarity)}")
    for c in beam.thought.components:
        out.append(f"{inner}component {_num(c.frequency)} {_num(c.amplitude)} {_num(c.phase)}")
    out.append(f"{inner}tag {beam.tag}")
    out.append(f"{pad}}}")


def _write_mutation(out: list[str], m: Mutation, indent: int) -> None:
    pad = "  " * indent
    head = f"{pad}mutation {m.seq} {m.op}"
    if m.op == "set_attribute":
        out.append(f"{head} {_quote(m.psyche)} {_quote(m.attribute)} {_num(m.value)}")
    elif m.op == "add_psyche":
        assert m.new_psyche is not None
        out.append(f"{head} psyche {_quote(m.new_psyche.attributes.name)} {{")
        buffer: list[str] = []
        _write_psyche(buffer, spec_lines(m.new_psyche), indent=indent)
        out.extend(buffer[1:-1])
        out.append(f"{pad}}}")
    elif m.op == "remove_psyche":
        out.append(f"{head} {_quote(m.psyche)}")
    elif m.op == "emit_beam":
        assert m.beam is not None
        buffer = []
        _write_thought(buffer, m.beam, indent=indent)
        out.append(f"{head} " + buffer[0].strip())
        out.extend(buffer[1:])
    elif m.op == "retire_beam":
        out.append(f"{head} {_quote(m.beam_id)}")
    elif m.op == "set_comfort":
        assert m.pair is not None
        out.append(f"{head} {_quote(m.pair[0])} {_quote(m.pair[1])} {_num(m.comfort)}")
    else:
        assert m.op == "reorient"
        out.append(f"{head} axis {_vec(m.axis)} angle {_num(m.angle)} pivot {_vec(m.pivot)}")


def format_document(text: str) -> str:
    """Rewrite a document in canonical form (the ``fmt`` operation)."""
    return serialize_scenario(parse_scenario(text))
