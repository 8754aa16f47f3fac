"""Shared fixtures and builders for the test suite."""

import warnings

import numpy as np
import pytest

from swarmlim.ensemble import MultiSpeciesState, SpeciesEnsemble

warnings.filterwarnings("ignore", message="The TBB threading layer")


def uniform_weights(m: int) -> np.ndarray:
    return np.full(m, 1.0 / m)


def make_state(positions_by_species, velocities_by_species=None, t=0.0):
    """State with uniform weights; positions are (M, d) per species."""
    species = []
    for k, pos in enumerate(positions_by_species):
        pos = np.atleast_2d(np.asarray(pos, dtype=float))
        vel = None
        if velocities_by_species is not None:
            vel = np.atleast_2d(np.asarray(velocities_by_species[k], dtype=float))
        species.append(
            SpeciesEnsemble(
                positions=pos, weights=uniform_weights(pos.shape[0]), velocities=vel
            )
        )
    return MultiSpeciesState(time=t, species=tuple(species))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
