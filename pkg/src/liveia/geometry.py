"""Minimal 3D vector and ray primitives.

Everything is immutable, double precision, and free of randomness; these
types carry all scene geometry for the optics kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidArgument

#: Tolerance for unit-length checks on direction vectors.
UNIT_TOLERANCE = 1e-9


@dataclass(frozen=True, slots=True)
class Vec3:
    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, s: float) -> "Vec3":
        return Vec3(self.x * s, self.y * s, self.z * s)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def length(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.length()
        if n == 0.0:
            raise InvalidArgument("cannot normalize a zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def is_unit(self, tol: float = UNIT_TOLERANCE) -> bool:
        return abs(self.length() - 1.0) <= tol

    def distance_to(self, other: "Vec3") -> float:
        return (self - other).length()

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


ZERO = Vec3(0.0, 0.0, 0.0)
X_AXIS = Vec3(1.0, 0.0, 0.0)
Y_AXIS = Vec3(0.0, 1.0, 0.0)
Z_AXIS = Vec3(0.0, 0.0, 1.0)


def require_unit(v: Vec3, name: str) -> None:
    if not v.is_unit():
        raise InvalidArgument(f"{name} must be unit length, got |v| = {v.length()!r}")


@dataclass(frozen=True, slots=True)
class Ray:
    """Origin plus unit direction. The constructor enforces unit length."""

    origin: Vec3
    direction: Vec3

    def __post_init__(self) -> None:
        if self.direction.length() == 0.0:
            raise InvalidArgument("ray direction must be non-zero")
        require_unit(self.direction, "ray direction")

    def at(self, t: float) -> Vec3:
        return self.origin + self.direction * t

    @staticmethod
    def towards(origin: Vec3, target: Vec3) -> "Ray":
        return Ray(origin, (target - origin).normalized())


def angle_between(a: Vec3, b: Vec3) -> float:
    """Angle in radians between two directions, robust near 0 and pi."""
    ua = a.normalized()
    ub = b.normalized()
    return math.atan2(ua.cross(ub).length(), ua.dot(ub))


def rotate_about_axis(v: Vec3, axis: Vec3, angle: float) -> Vec3:
    """Rodrigues rotation of ``v`` about the unit ``axis`` by ``angle``."""
    require_unit(axis, "rotation axis")
    c = math.cos(angle)
    s = math.sin(angle)
    return v * c + axis.cross(v) * s + axis * (axis.dot(v) * (1.0 - c))


def perpendicular_to(d: Vec3) -> Vec3:
    """A deterministic unit vector perpendicular to ``d``.

    Uses the coordinate axis least aligned with ``d`` so the result is
    stable under small perturbations of the input.
    """
    ax, ay, az = abs(d.x), abs(d.y), abs(d.z)
    if ax <= ay and ax <= az:
        seed = X_AXIS
    elif ay <= az:
        seed = Y_AXIS
    else:
        seed = Z_AXIS
    return d.cross(seed).normalized()
