import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from liveia.geometry import Vec3
from liveia.optics import ShellGeometry

REPO_ROOT = Path(__file__).resolve().parent.parent
DEMO_SCENARIO = REPO_ROOT / "demo" / "alice.liveia"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


@pytest.fixture
def solid_sphere() -> ShellGeometry:
    """The canonical near-solid test sphere: n = 1.5, negligible core."""
    return ShellGeometry(
        center=Vec3(0.0, 0.0, 0.0),
        outer_radius=1.0,
        shell_thickness=0.999,
        refractive_index=1.5,
    )


@pytest.fixture
def hollow_sphere() -> ShellGeometry:
    """A roomy-core shell for interior bounce scenarios."""
    return ShellGeometry(
        center=Vec3(0.0, 0.0, 0.0),
        outer_radius=1.0,
        shell_thickness=0.2,
        refractive_index=1.5,
    )
