import math
import random

import pytest

from liveia.dsl import format_document, parse_scenario, serialize_scenario
from liveia.errors import DslError
from liveia.geometry import Vec3
from liveia.optics import MirrorMode, WaveComponent
from liveia.scenario import (
    DEFAULT_CAMERA,
    build_beam,
    build_psyche_spec,
    make_scenario,
)
from liveia.semantics import ComfortRelation, ShadowAspect, deception_route

from genscenarios import random_scenario

DECEPTION_DOC = """liveia 1
scenario "deception study" {
  psyche "alice" {
    position -3 0 0
    radius 1
    vitality 0.9
    accessibility 0.7
    depth 0.5
    shadow "mask" severity 0.5 placement surface mode mirror
  }
  psyche "bob" {
    position 3 0 0
    radius 1
    vitality 0.6
    accessibility 0.9
    depth 0.3
  }
  comfort "alice" "bob" 0.4
  thought "t1" from "alice" {
    direction 1 0 0
    valence 0.8
    clarity 0.6
    component 2 1 0
    tag thought
  }
}
"""


def test_empty_scenario_has_default_camera():
    s = parse_scenario('liveia 1\nscenario "empty" { }\n')
    assert s.name == "empty"
    assert s.psyches == ()
    assert s.beams == ()
    assert s.camera == DEFAULT_CAMERA
    assert s.scenario_id == ""
    assert s.revision == 0


def test_comfort_range_error_names_construct_and_line():
    doc = 'liveia 1\nscenario "x" {\n  psyche "a" { position 0 0 0 radius 1 vitality 1 accessibility 1 depth 0 }\n  psyche "b" { position 5 0 0 radius 1 vitality 1 accessibility 1 depth 0 }\n  comfort "a" "b" 1.5\n}\n'
    with pytest.raises(DslError) as err:
        parse_scenario(doc)
    assert "comfort" in str(err.value)
    assert err.value.line == 5


def test_deception_document_matches_hand_built_graph():
    parsed = parse_scenario(DECEPTION_DOC)
    expected = make_scenario(
        name="deception study",
        psyches=[
            build_psyche_spec(
                "alice", Vec3(-3, 0, 0), 1.0, 0.9, 0.7, 0.5,
                shadow_aspects=(ShadowAspect("mask", 0.5, "surface",
                                             mode_override=MirrorMode()),),
            ).compiled(),
            build_psyche_spec("bob", Vec3(3, 0, 0), 1.0, 0.6, 0.9, 0.3).compiled(),
        ],
        comfort=ComfortRelation({("alice", "bob"): 0.4}),
        beams=[build_beam("t1", Vec3(1, 0, 0), 0.8, 0.6,
                          (WaveComponent(2.0, 1.0, 0.0),),
                          source_psyche="alice")],
    )
    assert parsed == expected
    # The authored deception setup actually routes.
    alice = parsed.psyche("alice")
    beam, report = deception_route(alice, parsed.beams[0].thought, "other")
    assert report.bend_angle > 0.0
    assert beam.tag == "deception_other"


def test_canonical_fixpoint():
    canonical = serialize_scenario(parse_scenario(DECEPTION_DOC))
    assert serialize_scenario(parse_scenario(canonical)) == canonical
    assert format_document(canonical) == canonical


def test_non_canonical_whitespace_normalizes():
    messy = DECEPTION_DOC.replace("\n  ", "\n\t\t ").replace("position -3 0 0",
                                                             "position  -3   0  0")
    assert parse_scenario(messy) == parse_scenario(DECEPTION_DOC)
    assert format_document(messy) == format_document(DECEPTION_DOC)


def test_round_trip_randomized_scenarios():
    rng = random.Random(31337)
    for _ in range(120):
        scenario = random_scenario(rng)
        text = serialize_scenario(scenario)
        reparsed = parse_scenario(text)
        assert reparsed == scenario
        assert serialize_scenario(reparsed) == text


def test_unknown_statement_reports_position():
    doc = 'liveia 1\nscenario "x" {\n  wibble 3\n}\n'
    with pytest.raises(DslError) as err:
        parse_scenario(doc)
    assert err.value.line == 3
    assert "wibble" in str(err.value)


def test_unterminated_string_reports_position():
    doc = 'liveia 1\nscenario "x {\n}\n'
    with pytest.raises(DslError) as err:
        parse_scenario(doc)
    assert err.value.line == 2


def test_overlapping_psyches_rejected_with_names():
    doc = ('liveia 1\nscenario "x" {\n'
           '  psyche "a" { position 0 0 0 radius 1 vitality 1 accessibility 1 depth 0 }\n'
           '  psyche "b" { position 1 0 0 radius 1 vitality 1 accessibility 1 depth 0 }\n'
           '}\n')
    with pytest.raises(DslError) as err:
        parse_scenario(doc)
    assert "overlaps" in str(err.value)
    assert "a" in str(err.value) and "b" in str(err.value)


def test_missing_psyche_fields_rejected():
    doc = 'liveia 1\nscenario "x" {\n  psyche "a" { position 0 0 0 }\n}\n'
    with pytest.raises(DslError) as err:
        parse_scenario(doc)
    assert "radius" in str(err.value)


def test_bad_version_rejected():
    with pytest.raises(DslError):
        parse_scenario('liveia 2\nscenario "x" { }\n')


def test_unknown_beam_tag_rejected():
    doc = ('liveia 1\nscenario "x" {\n'
           '  psyche "a" { position 0 0 0 radius 1 vitality 1 accessibility 1 depth 0 }\n'
           '  thought "t" from "a" { direction 1 0 0 valence 0.5 clarity 0.5 '
           'component 1 1 0 tag nonsense }\n}\n')
    with pytest.raises(DslError) as err:
        parse_scenario(doc)
    assert "nonsense" in str(err.value)


def test_thought_from_unknown_psyche_rejected():
    doc = ('liveia 1\nscenario "x" {\n'
           '  thought "t" from "ghost" { direction 1 0 0 valence 0.5 clarity 0.5 '
           'component 1 1 0 }\n}\n')
    with pytest.raises(DslError):
        parse_scenario(doc)


def test_string_escapes_round_trip():
    s = make_scenario(name='with "quotes" and \\slashes\\')
    text = serialize_scenario(s)
    assert parse_scenario(text) == s


def test_lineage_round_trip():
    rng = random.Random(777)
    for _ in range(30):
        scenario = random_scenario(rng, with_lineage=True)
        if not scenario.mutation_log:
            continue
        text = serialize_scenario(scenario)
        reparsed = parse_scenario(text)
        assert reparsed.mutation_log == scenario.mutation_log
        assert reparsed.parent_id == scenario.parent_id


def test_mutation_sequence_must_be_contiguous():
    doc = ('liveia 1\nscenario "x" {\n  lineage {\n'
           '    mutation 2 remove_psyche "a"\n  }\n}\n')
    with pytest.raises(DslError) as err:
        parse_scenario(doc)
    assert "contiguous" in str(err.value)
