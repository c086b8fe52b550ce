"""Shared bases, tensors and converged states for the test suite."""

import numpy as np
import pytest

from gaussian_bec.basis import BasisSpec, InteractionTensor
from gaussian_bec.ground import SolverConfig, solve_ground


@pytest.fixture(scope="session")
def tiny_spec():
    return BasisSpec(n_cut=4, l_max=1)


@pytest.fixture(scope="session")
def tiny_tensors(tiny_spec):
    return InteractionTensor.build(tiny_spec)


@pytest.fixture(scope="session")
def small_spec():
    return BasisSpec(n_cut=6, l_max=2)


@pytest.fixture(scope="session")
def small_tensors(small_spec):
    return InteractionTensor.build(small_spec)


@pytest.fixture(scope="session")
def free_ground(small_tensors):
    config = SolverConfig(target_N=100.0, a_s=0.0, seed_mode="coherent")
    return solve_ground(config, small_tensors)


@pytest.fixture(scope="session")
def csc_ground(small_tensors):
    """Weakly repulsive coherent condensate, N a_s / a_ho = 0.05 at N = 1e4, tightly converged."""
    N = 1.0e4
    config = SolverConfig(target_N=N, a_s=0.05 / N, seed_mode="coherent",
                          tol_eta=1e-9, tol_gamma=1e-9, mu_tol=1e-10, max_dtau=10.0)
    return solve_ground(config, small_tensors)


@pytest.fixture
def rng():
    return np.random.default_rng(7)
