import json
from pathlib import Path

import pytest

from latentboundary.synthetic import make_suite

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def pilot():
    with open(FIXTURES / "pilot.json") as f:
        return json.load(f)


@pytest.fixture(scope="session")
def suite():
    """The default K=10 desk-scale suite (seed 0)."""
    return make_suite(seed=0)


@pytest.fixture(scope="session")
def small_suite():
    """A cheaper 4-class suite for protocol and plumbing tests."""
    return make_suite(latent_dim=8, image_dim=32, num_classes=4, seed=1,
                      samples_per_class=5, sample_radius=0.1)
