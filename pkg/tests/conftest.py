import numpy as np
import pytest
from hypothesis import settings

from acceptance_log import RESULTS
from cutstokes import Box, PolytopeDomain, build_structured_tet_mesh, classify_and_decompose

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(RESULTS):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def unit_cube():
    return PolytopeDomain.box([0, 0, 0], [1, 1, 1])


@pytest.fixture(scope="session")
def single_cube_mesh():
    return build_structured_tet_mesh(Box.cube(0.0, 1.0), (1, 1, 1))


@pytest.fixture(scope="session")
def half_cube(single_cube_mesh):
    dom = PolytopeDomain.box([0, 0, 0], [0.5, 1, 1])
    return single_cube_mesh, dom, classify_and_decompose(single_cube_mesh, dom)
