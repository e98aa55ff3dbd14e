import hypothesis
import numpy as np
import pytest

from anchoropt.room import Room, build_grid

hypothesis.settings.register_profile("default", deadline=None, max_examples=50)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def room():
    return Room()


@pytest.fixture
def desk_grid(room):
    return build_grid(room, (5, 4, 3))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
