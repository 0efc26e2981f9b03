import numpy as np
import pytest
from hypothesis import settings

from nitsche_xfem import problems
from nitsche_xfem.geometry import LevelSetInterface, classify_and_cut
from nitsche_xfem.mesh import TriangleMesh, build_hierarchy
from nitsche_xfem.space import build_space

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

SEED = 20240611


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def circle_space_small():
    mesh = TriangleMesh.structured(12)
    return build_space(classify_and_cut(mesh, [problems.circle()]))


@pytest.fixture(scope="session")
def line_space_small():
    mesh = TriangleMesh.structured(10)
    return build_space(classify_and_cut(mesh, [LevelSetInterface.linear(problems.LINEAR_OFFSET)]))


@pytest.fixture(scope="session")
def circle_hierarchy_spaces():
    hier = build_hierarchy(6, 3)
    return [build_space(classify_and_cut(m, [problems.circle()])) for m in hier.levels]


def pytest_terminal_summary(terminalreporter):
    lines = []
    for reports in terminalreporter.stats.values():
        for rep in reports:
            for key, value in getattr(rep, "user_properties", []):
                if key == "criterion" and getattr(rep, "when", "call") == "call":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
