import pytest

from mriextract import load_backbone


@pytest.fixture(scope="session")
def backbone():
    # seeded mode: the ImageNet checkpoint is not fetchable in offline CI
    return load_backbone("seeded", seed=0)
