import pathlib

import pytest

REPO = pathlib.Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def model_path():
    return str(REPO / "models" / "two_scalar.json")


@pytest.fixture(scope="session")
def docs_dir():
    return REPO / "docs"
