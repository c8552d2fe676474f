import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=100, deadline=None, derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# verdict lines collected by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_model():
    from glitchkit.glitchnet import GlitchNet, desk_config

    return GlitchNet(desk_config(), seed=3)


def tiny_scene(width=32, height=16, frames=3, velocity=(4, 0), clear="SolidColor", cameras=None):
    from glitchkit.rendersim import CameraSpec, DrawableSpec, LayerSpec, SceneSpec

    layer = LayerSpec("world", (
        DrawableSpec("rect", 0, height - 4, width, 4, color=(40, 120, 40)),
        DrawableSpec("rect", 2, 4, 4, 4, color=(250, 200, 10), velocity=velocity),
    ))
    cams = cameras or (CameraSpec(clear_flag=clear, clear_color=(20, 30, 90), layer_mask=(0,)),)
    return SceneSpec(width, height, (layer,), cams, frame_count=frames, seed=5, name="tiny")
