import os

import pytest

from sbomscope.bench import generate_fixtures

DATA = os.path.join(os.path.dirname(__file__), "data")


@pytest.fixture(scope="session")
def fixtures_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("bench")
    generate_fixtures(str(out))
    return str(out)


@pytest.fixture(scope="session")
def class_dir():
    return os.path.join(DATA, "classes")
