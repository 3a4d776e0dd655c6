import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def schottky():
    from anosov.dynamics import fixture_path, load_representation
    return load_representation(fixture_path("schottky_k2_t3.json"))


@pytest.fixture(scope="session")
def adjoint(schottky):
    from anosov.dynamics import adjoint_realization
    return adjoint_realization(schottky)


@pytest.fixture(scope="session")
def adjoint_sample(adjoint):
    from anosov.domains import LimitSetSampleRef
    from anosov.dynamics import limit_set_sample
    return LimitSetSampleRef.from_dynamics(limit_set_sample(adjoint, 8, "line", adjoint.form))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(".")[0].split()[-1])):
            terminalreporter.write_line(line)
