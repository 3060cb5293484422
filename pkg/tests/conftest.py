import numpy as np
import pytest

from roomcad.cadlib import ViewDatabase, load_library
from roomcad.synthetic import make_fixture


@pytest.fixture(scope="session")
def library():
    return load_library()


@pytest.fixture(scope="session")
def models(library):
    return {k: m.triangles for k, m in library.items()}


@pytest.fixture(scope="session")
def view_db(library):
    return ViewDatabase.build(library)


@pytest.fixture(scope="session")
def fixture(models):
    return make_fixture(models=models)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
