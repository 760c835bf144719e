import pytest

from mristage.data import load_dataset

from _helpers import FIXTURES


@pytest.fixture(scope="session")
def gauss3():
    return load_dataset(FIXTURES / "gauss3" / "manifest.json")


@pytest.fixture(scope="session")
def imb9to1():
    return load_dataset(FIXTURES / "imb9to1" / "manifest.json")


@pytest.fixture(scope="session")
def oasis_shape():
    return load_dataset(FIXTURES / "oasis_shape" / "manifest.json")
