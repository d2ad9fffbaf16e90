"""Deterministic image rendering.

One primary ray per pixel through the scenario camera; shading is emitter
glow through the shell, procedural surface patterns, additive beam capsules
from real traces, and a comfort-blur post-pass on sphere silhouettes.
Output is bit-identical across runs and across worker counts: pixels are
pure functions of the scenario, workers write disjoint rows, and the beam
and blur passes run single-threaded after a full-frame barrier.
"""

from __future__ import annotations

import colorsys
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .errors import InvalidArgument
from .geometry import Ray, Vec3
from .optics import Beam, TraceLimits, trace_beam
from .scenario import Camera, Scenario, runtime_beam
from .semantics import PsycheSphere, SurfacePattern, comfort_blur_radius

BACKGROUND = (8, 8, 12)
BEAM_COLOR = (1.0, 0.93, 0.78)
PATTERN_SATURATION = 0.45
AMBIENT = 0.15
CAPSULE_BASE_RADIUS = 0.01
CAPSULE_DIVERGENCE_GAIN = 0.05


@dataclass(frozen=True, slots=True)
class Image:
    width: int
    height: int
    pixels: bytes  # rows of 8-bit RGB, top to bottom

    def to_ppm(self) -> bytes:
        header = f"P6\n{self.width} {self.height}\n255\n".encode("ascii")
        return header + self.pixels

    def pixel(self, x: int, y: int) -> tuple[int, int, int]:
        i = (y * self.width + x) * 3
        return (self.pixels[i], self.pixels[i + 1], self.pixels[i + 2])


def write_ppm(image: Image, path) -> None:
    with open(path, "wb") as fh:
        fh.write(image.to_ppm())


def read_ppm(path) -> Image:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(b"P6"):
        raise InvalidArgument("not a P6 pixmap")
    parts = data.split(b"\n", 3)
    width, height = (int(v) for v in parts[1].split())
    return Image(width=width, height=height, pixels=parts[3])


class _CameraFrame:
    def __init__(self, camera: Camera, width: int, height: int):
        self.position = camera.position
        self.forward = (camera.look_at - camera.position).normalized()
        right = self.forward.cross(camera.up.normalized())
        if right.length() < 1e-9:
            raise InvalidArgument("camera up is parallel to the view direction")
        self.right = right.normalized()
        self.up = self.right.cross(self.forward)
        self.width = width
        self.height = height
        self.tan_half = math.tan(math.radians(camera.fov_degrees) / 2.0)
        self.aspect = width / height

    def ray_through(self, px: int, py: int) -> Ray:
        ndc_x = (2.0 * (px + 0.5) / self.width - 1.0) * self.tan_half * self.aspect
        ndc_y = (1.0 - 2.0 * (py + 0.5) / self.height) * self.tan_half
        direction = (self.forward + self.right * ndc_x + self.up * ndc_y).normalized()
        return Ray(self.position, direction)

    def project(self, point: Vec3) -> tuple[float, float, float] | None:
        """(pixel x, pixel y, camera depth) or None behind the camera."""
        rel = point - self.position
        z = rel.dot(self.forward)
        if z <= 1e-9:
            return None
        x = rel.dot(self.right) / (z * self.tan_half * self.aspect)
        y = rel.dot(self.up) / (z * self.tan_half)
        px = (x + 1.0) * 0.5 * self.width - 0.5
        py = (1.0 - y) * 0.5 * self.height - 0.5
        return (px, py, z)

    def pixels_per_unit(self, depth: float) -> float:
        return self.height / (2.0 * depth * self.tan_half)


def _hit_sphere(ray: Ray, sphere: PsycheSphere) -> float | None:
    oc = ray.origin - sphere.shell.center
    b = ray.direction.dot(oc)
    c = oc.dot(oc) - sphere.shell.outer_radius**2
    disc = b * b - c
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    for t in (-b - root, -b + root):
        if t > 1e-9:
            return t
    return None


def _mix_hash(a: int, b: int, seed: int) -> float:
    h = (a * 73856093) ^ (b * 19349663) ^ (seed * 83492791)
    h &= 0xFFFFFFFF
    h ^= h >> 16
    h = (h * 0x45D9F3B) & 0xFFFFFFFF
    h ^= h >> 16
    return h / 0xFFFFFFFF


def _pattern_color(pattern: SurfacePattern, lat: float, lon: float) -> tuple[float, float, float]:
    base = colorsys.hsv_to_rgb(pattern.base_hue / 360.0, PATTERN_SATURATION, 1.0)
    accent = colorsys.hsv_to_rgb(pattern.accent_hue / 360.0, PATTERN_SATURATION, 1.0)
    phase = (pattern.seed % 997) / 997.0 * 2.0 * math.pi
    if pattern.pattern_id == "bands":
        t = 0.5 + 0.5 * math.sin(lat * (3.0 + 6.0 * pattern.scale) * math.pi + phase)
    elif pattern.pattern_id == "spots":
        cells = 2.0 + 4.0 * pattern.scale
        ci = math.floor((lon / math.pi + 1.0) * cells)
        cj = math.floor((lat / math.pi + 0.5) * cells)
        t = 1.0 if _mix_hash(ci, cj, pattern.seed) > 0.55 else 0.0
    else:  # marble
        t = 0.5 + 0.5 * math.sin(
            (lon + 2.0 * math.sin(lat * 3.0 + phase)) * (2.0 + 3.0 * pattern.scale)
        )
    return (
        base[0] + (accent[0] - base[0]) * t,
        base[1] + (accent[1] - base[1]) * t,
        base[2] + (accent[2] - base[2]) * t,
    )


def _shade_sphere(ray: Ray, t: float, sphere: PsycheSphere) -> tuple[float, float, float]:
    point = ray.at(t)
    normal = (point - sphere.shell.center).normalized()
    facing = max(0.0, -normal.dot(ray.direction))
    # Emitter glow reaching the surface point radially through one shell
    # crossing (the reference attenuation length is the shell thickness).
    glow = sphere.emitter_intensity * (1.0 - sphere.shell.shell_opacity)
    brightness = AMBIENT + (1.0 - AMBIENT) * min(1.0, glow) * facing
    lat = math.asin(max(-1.0, min(1.0, normal.z)))
    lon = math.atan2(normal.y, normal.x)
    r, g, b = _pattern_color(sphere.pattern, lat, lon)
    return (r * brightness, g * brightness, b * brightness)


def _segment_capsules(s: Scenario, limits: TraceLimits) -> list[tuple[Vec3, Vec3, float, float]]:
    """(start, end, intensity, world radius) per traced segment."""
    capsules = []
    scene = s.scene()
    for authored in s.beams:
        beam = runtime_beam(s, authored)
        radius = CAPSULE_BASE_RADIUS + CAPSULE_DIVERGENCE_GAIN * math.tan(beam.divergence)
        tree = trace_beam(scene, beam, limits)
        for node in tree.iter_nodes():
            if node.start.distance_to(node.end) < 1e-9:
                continue
            capsules.append((node.start, node.end, node.intensity, radius))
    return capsules


def _point_segment_distance(p: Vec3, a: Vec3, b: Vec3) -> float:
    ab = b - a
    denom = ab.dot(ab)
    if denom <= 0.0:
        return p.distance_to(a)
    t = max(0.0, min(1.0, (p - a).dot(ab) / denom))
    return p.distance_to(a + ab * t)


def _ray_segment_distance(ray: Ray, a: Vec3, b: Vec3, max_t: float) -> float:
    """Distance between a camera ray (clamped to [0, max_t]) and a segment,
    via a fixed-step sample along the segment; deterministic and plenty for
    capsule glow."""
    steps = 8
    best = math.inf
    ab = b - a
    for i in range(steps + 1):
        q = a + ab * (i / steps)
        t = max(0.0, min(max_t, (q - ray.origin).dot(ray.direction)))
        p = ray.at(t)
        d = p.distance_to(q)
        if d < best:
            best = d
    return best


def render_image(s: Scenario, width: int, height: int, workers: int = 1,
                 limits: TraceLimits | None = None) -> Image:
    """Render the scenario to an RGB image; byte-identical for identical
    inputs regardless of ``workers``."""
    if not 16 <= width <= 4096 or not 16 <= height <= 4096:
        raise InvalidArgument("image dimensions must lie in [16, 4096]")
    if workers < 1:
        raise InvalidArgument("workers must be >= 1")
    if limits is None:
        limits = TraceLimits()
    frame = _CameraFrame(s.camera, width, height)
    buffer = [0.0] * (width * height * 3)
    spheres = list(s.psyches)

    bg = (BACKGROUND[0] / 255.0, BACKGROUND[1] / 255.0, BACKGROUND[2] / 255.0)

    def shade_row(py: int) -> None:
        base = py * width * 3
        for px in range(width):
            ray = frame.ray_through(px, py)
            best_t = math.inf
            best = None
            for sphere in spheres:
                t = _hit_sphere(ray, sphere)
                if t is not None and t < best_t:
                    best_t = t
                    best = sphere
            if best is None:
                rgb = bg
            else:
                rgb = _shade_sphere(ray, best_t, best)
            i = base + px * 3
            buffer[i] = rgb[0]
            buffer[i + 1] = rgb[1]
            buffer[i + 2] = rgb[2]

    if workers == 1:
        for py in range(height):
            shade_row(py)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(shade_row, range(height)))

    _draw_beams(s, frame, buffer, width, height, limits)
    _comfort_blur(s, frame, buffer, width, height)

    out = bytearray(width * height * 3)
    for i, v in enumerate(buffer):
        out[i] = min(255, int(max(0.0, v) * 255.0 + 0.5))
    return Image(width=width, height=height, pixels=bytes(out))


def _draw_beams(s: Scenario, frame: _CameraFrame, buffer: list[float],
                width: int, height: int, limits: TraceLimits) -> None:
    for a, b, intensity, radius in _segment_capsules(s, limits):
        pa = frame.project(a)
        pb = frame.project(b)
        if pa is None and pb is None:
            continue
        if pa is None or pb is None:
            # One endpoint behind the camera: fall back to a full-frame
            # sweep for this segment (rare, still deterministic).
            x_lo, x_hi, y_lo, y_hi = 0, width - 1, 0, height - 1
        else:
            depth = min(pa[2], pb[2])
            pad = radius * frame.pixels_per_unit(depth) + 2.0
            x_lo = max(0, int(min(pa[0], pb[0]) - pad))
            x_hi = min(width - 1, int(max(pa[0], pb[0]) + pad) + 1)
            y_lo = max(0, int(min(pa[1], pb[1]) - pad))
            y_hi = min(height - 1, int(max(pa[1], pb[1]) + pad) + 1)
        if x_lo > x_hi or y_lo > y_hi:
            continue
        max_t = max((a - frame.position).dot(frame.forward),
                    (b - frame.position).dot(frame.forward)) + radius + 1.0
        strength = min(1.0, intensity)
        for py in range(y_lo, y_hi + 1):
            for px in range(x_lo, x_hi + 1):
                ray = frame.ray_through(px, py)
                d = _ray_segment_distance(ray, a, b, max_t)
                if d >= radius:
                    continue
                fall = 1.0 - d / radius
                add = strength * fall * fall
                i = (py * width + px) * 3
                buffer[i] += BEAM_COLOR[0] * add
                buffer[i + 1] += BEAM_COLOR[1] * add
                buffer[i + 2] += BEAM_COLOR[2] * add


def _comfort_blur(s: Scenario, frame: _CameraFrame, buffer: list[float],
                  width: int, height: int) -> None:
    jobs = []
    for (a_name, b_name), comfort in s.comfort.items():
        a = s.psyche(a_name)
        b = s.psyche(b_name)
        gap = max(0.0, a.center.distance_to(b.center)
                  - a.shell.outer_radius - b.shell.outer_radius)
        for sphere in (a, b):
            blur = comfort_blur_radius(comfort, gap, sphere.shell.outer_radius)
            if blur > 0.0:
                jobs.append((sphere, blur))
    if not jobs:
        return

    snapshot = list(buffer)

    def box_mean(px: int, py: int, r: int) -> tuple[float, float, float]:
        x0, x1 = max(0, px - r), min(width - 1, px + r)
        y0, y1 = max(0, py - r), min(height - 1, py + r)
        acc = [0.0, 0.0, 0.0]
        count = 0
        for y in range(y0, y1 + 1):
            base = y * width * 3
            for x in range(x0, x1 + 1):
                i = base + x * 3
                acc[0] += snapshot[i]
                acc[1] += snapshot[i + 1]
                acc[2] += snapshot[i + 2]
                count += 1
        return (acc[0] / count, acc[1] / count, acc[2] / count)

    for sphere, blur in jobs:
        projected = frame.project(sphere.center)
        if projected is None:
            continue
        cx, cy, depth = projected
        scale = frame.pixels_per_unit(depth)
        silhouette_px = sphere.shell.outer_radius * scale
        blur_px = max(1, int(blur * scale + 0.5))
        band = blur_px + 1
        x_lo = max(0, int(cx - silhouette_px - band))
        x_hi = min(width - 1, int(cx + silhouette_px + band) + 1)
        y_lo = max(0, int(cy - silhouette_px - band))
        y_hi = min(height - 1, int(cy + silhouette_px + band) + 1)
        for py in range(y_lo, y_hi + 1):
            for px in range(x_lo, x_hi + 1):
                rim = abs(math.hypot(px - cx, py - cy) - silhouette_px)
                if rim > band:
                    continue
                rgb = box_mean(px, py, blur_px)
                i = (py * width + px) * 3
                buffer[i] = rgb[0]
                buffer[i + 1] = rgb[1]
                buffer[i + 2] = rgb[2]
