import pytest

from liveia.errors import InvalidArgument
from liveia.geometry import Vec3
from liveia.optics import WaveComponent
from liveia.render import BACKGROUND, Image, read_ppm, render_image, write_ppm
from liveia.scenario import build_beam, build_psyche_spec, make_scenario
from liveia.semantics import ComfortRelation


def solo_scenario(vitality: float, accessibility: float = 1.0):
    return make_scenario(
        name="solo",
        psyches=[build_psyche_spec("alice", Vec3(0, 0, 0), 1.0,
                                   vitality, accessibility, 0.5,
                                   traits={"curiosity": 0.7}).compiled()],
    )


def mean_luminance(img: Image) -> float:
    total = 0
    for i in range(0, len(img.pixels), 3):
        r, g, b = img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]
        total += 2126 * r + 7152 * g + 722 * b
    return total / (10000 * (len(img.pixels) // 3))


def test_empty_scenario_renders_uniform_background():
    img = render_image(make_scenario(name="empty"), 32, 32)
    for y in range(32):
        for x in range(32):
            assert img.pixel(x, y) == BACKGROUND


def test_render_is_deterministic_across_runs_and_workers():
    s = solo_scenario(0.8, 0.7)
    a = render_image(s, 48, 48)
    b = render_image(s, 48, 48)
    c = render_image(s, 48, 48, workers=4)
    assert a.pixels == b.pixels == c.pixels


def test_vitality_orders_mean_luminance():
    bright = render_image(solo_scenario(0.9), 48, 48)
    dim = render_image(solo_scenario(0.3), 48, 48)
    assert mean_luminance(bright) > mean_luminance(dim)


def test_emitter_brightness_is_pixelwise_monotone():
    lo = render_image(solo_scenario(0.3), 32, 32)
    hi = render_image(solo_scenario(0.9), 32, 32)
    assert all(h >= l for h, l in zip(hi.pixels, lo.pixels))
    assert hi.pixels != lo.pixels


def test_beams_add_light():
    base = solo_scenario(0.5)
    with_beam = make_scenario(
        name="solo",
        psyches=list(base.psyches),
        beams=[build_beam("t1", Vec3(0.2, 1.0, 0.1), 0.9, 0.4,
                          (WaveComponent(1.0, 1.0, 0.0),),
                          source_psyche="alice")],
    )
    img_base = render_image(base, 48, 48)
    img_beam = render_image(with_beam, 48, 48)
    assert mean_luminance(img_beam) > mean_luminance(img_base)


def test_comfort_blur_changes_silhouettes_only_in_render():
    psyches = [
        build_psyche_spec("alice", Vec3(0, -1.05, 0), 1.0, 0.8, 0.9, 0.5).compiled(),
        build_psyche_spec("bob", Vec3(0, 1.05, 0), 1.0, 0.8, 0.9, 0.5).compiled(),
    ]
    cold = make_scenario(name="pair", psyches=psyches)
    warm = make_scenario(name="pair", psyches=psyches,
                         comfort=ComfortRelation({("alice", "bob"): 1.0}))
    img_cold = render_image(cold, 48, 48)
    img_warm = render_image(warm, 48, 48)
    assert img_cold.pixels != img_warm.pixels
    # Comfort is render-only: the physics objects are identical.
    assert cold.psyches == warm.psyches


def test_ppm_round_trip(tmp_path):
    img = render_image(solo_scenario(0.7), 32, 32)
    path = tmp_path / "out.ppm"
    write_ppm(img, path)
    data = path.read_bytes()
    assert data.startswith(b"P6\n32 32\n255\n")
    back = read_ppm(path)
    assert back == img


def test_dimension_bounds_enforced():
    s = make_scenario(name="empty")
    with pytest.raises(InvalidArgument):
        render_image(s, 8, 32)
    with pytest.raises(InvalidArgument):
        render_image(s, 32, 8192)
