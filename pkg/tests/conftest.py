"""Shared pytest fixtures for einstein-embed."""

import os
import sys

import numpy as np
import pytest

# Add src to path for module imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_jet(rng, nvars, order, scale=1.0):
    from modules.jet_core import Jet, basis_size

    return Jet(nvars, order, scale * rng.standard_normal(basis_size(nvars, order)))


@pytest.fixture
def make_random_jet(rng):
    def _make(nvars, order, scale=1.0):
        return random_jet(rng, nvars, order, scale)

    return _make
