import numpy as np
import pytest

from eventrgbd.config import RunConfig


def small_config(width=80, height=60, **sections):
    """Default rig scaled down to a small camera with the same field of view."""
    f = 1000.0 * width / 640
    cam = {"width": width, "height": height, "fx": f, "fy": f}
    cam.update(sections.pop("camera", {}))
    return RunConfig().with_values(camera=cam, **sections)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_cfg():
    return small_config()


# one (criterion, passed, detail) entry per acceptance test, echoed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for name, ok, detail in sorted(ACCEPTANCE):
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
