import numpy as np
import pytest

from pinchflow.flow import FlowConfig, run
from pinchflow.profile import product_circle_state, profile_geometry

NECK_N = 512


def neckpinch_config(**kw):
    base = dict(regrid_every=10, regrid_curvature_weight=30.0, keep_snapshots=True)
    base.update(kw)
    return FlowConfig(**base)


@pytest.fixture(scope="session")
def neckpinch():
    """The n=8 neckpinch from u = 0.2(1 + 0.1 cos 2 pi x) over the unit circle, run to the singularity."""
    s = product_circle_state(8, 0.2, 1.0, NECK_N, k=2, bump_amplitude=0.1)
    return run(s, neckpinch_config())


@pytest.fixture(scope="session")
def neckpinch_geos(neckpinch):
    return [profile_geometry(s, grad=True) for s in neckpinch.snapshots]


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)
