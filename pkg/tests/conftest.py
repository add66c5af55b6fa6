import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")

# Filled by test_acceptance.py; printed once at the end of the session.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sphere():
    from texgeo.mesh_core.primitives import icosphere
    return icosphere(4)


@pytest.fixture(scope="session")
def uvsphere():
    from texgeo.mesh_core.primitives import uv_sphere
    return uv_sphere(64, 32)


@pytest.fixture(scope="session")
def uvsphere_atlas(uvsphere):
    from texgeo.mesh_core import rasterize_uv_atlas
    return rasterize_uv_atlas(uvsphere, 256, 256)
