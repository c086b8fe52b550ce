from dataclasses import replace

import numpy as np
import pytest

from gaussian_bec.basis import CoupledTensor, radial_grid_values
from gaussian_bec.errors import AssemblyError, DomainError
from gaussian_bec.fluct import (
    GOLDSTONE_TOL,
    SPECTRUM_COLUMNS,
    assemble_sector,
    density_fluctuation,
    diagonalize_sector,
    pair_channels,
    spectrum,
)
from gaussian_bec.ground import symplectic_diagonalize
from gaussian_bec.gstate import GaussianState, build_mean_field


@pytest.fixture(scope="module")
def free_setup(free_ground, small_tensors):
    state, _ = free_ground
    return state, symplectic_diagonalize(build_mean_field(state, small_tensors))


@pytest.fixture(scope="module")
def csc_setup(csc_ground, small_tensors):
    state, _ = csc_ground
    return state, symplectic_diagonalize(build_mean_field(state, small_tensors))


def _sector(L, setup, tensors):
    state, bogo = setup
    return assemble_sector(L, state, bogo, CoupledTensor(L, tensors))


# --------------------------------------------------------------------------------------
# Channels and assembly
# --------------------------------------------------------------------------------------


@pytest.mark.parametrize("L, l_max, expected", [
    (0, 2, [(0, 0), (1, 1), (2, 2)]),
    (1, 2, [(0, 1), (1, 2)]),
    (2, 2, [(0, 2), (1, 1), (2, 2)]),
    (1, 0, []),
])
def test_pair_channels(L, l_max, expected):
    assert pair_channels(L, l_max) == expected


def test_sector_layout(free_setup, small_tensors, small_spec):
    op = _sector(0, free_setup, small_tensors)
    nb = small_spec.nb
    assert op.n_1pe == nb
    assert [(c.l, c.l_p) for c in op.channels] == [(0, 0), (1, 1), (2, 2)]
    # symmetric channels keep s <= s'
    assert all(c.size == nb * (nb + 1) // 2 for c in op.channels)
    assert op.dim == nb + sum(c.size for c in op.channels)
    assert op.channels[0].offset == nb


def test_sector_operator_structure(csc_setup, small_tensors):
    op = _sector(1, csc_setup, small_tensors)
    dim = op.dim
    A, B = op.matrix[:dim, :dim], op.matrix[:dim, dim:]
    np.testing.assert_allclose(A, A.T, atol=1e-12)
    np.testing.assert_allclose(B, B.T, atol=1e-12)
    np.testing.assert_allclose(op.matrix[dim:, dim:], -A)
    np.testing.assert_allclose(op.matrix[dim:, :dim], -B)


def test_s_cut_shrinks_pair_channels(csc_setup, small_tensors):
    state, bogo = csc_setup
    op = assemble_sector(1, state, bogo, CoupledTensor(1, small_tensors), s_cut=2)
    assert op.s_cut == 2
    assert all(c.size == 9 for c in op.channels)


def test_mismatched_tensor_rejected(csc_setup, small_tensors):
    state, bogo = csc_setup
    with pytest.raises(AssemblyError):
        assemble_sector(0, state, bogo, CoupledTensor(1, small_tensors))


def test_complex_ground_state_rejected(csc_setup, small_tensors):
    state, bogo = csc_setup
    with pytest.raises(DomainError):
        assemble_sector(0, replace(state, beta=1j * state.beta), bogo, CoupledTensor(0, small_tensors))


def test_squeezed_state_decouples_one_particle_sector(small_spec, small_tensors):
    state = GaussianState.squeezed(small_spec, 100.0, mu=1.5)
    bogo = symplectic_diagonalize(build_mean_field(state, small_tensors))
    op = assemble_sector(1, state, bogo, CoupledTensor(1, small_tensors))
    assert op.n_1pe == 0
    assert op.dim == sum(c.size for c in op.channels)


# --------------------------------------------------------------------------------------
# Spectra
# --------------------------------------------------------------------------------------


def test_free_dipole_modes(free_setup, small_tensors):
    modes = diagonalize_sector(_sector(1, free_setup, small_tensors), free_setup[0])
    dipoles = [m for m in modes if abs(m.omega - 1.0) < 1e-6]
    assert len(dipoles) == 2
    assert sum(m.degeneracy for m in dipoles) == 6
    np.testing.assert_allclose(sorted(m.weight_1pe for m in dipoles), [0.0, 1.0], atol=1e-8)
    assert min(m.omega for m in modes) == pytest.approx(1.0, abs=1e-6)


def test_free_monopole_sector(free_setup, small_tensors):
    modes = diagonalize_sector(_sector(0, free_setup, small_tensors), free_setup[0])
    assert modes[0].label == "goldstone"
    breathing = [m for m in modes if m.label == "breathing"]
    assert len(breathing) == 1
    assert breathing[0].omega == pytest.approx(2.0, abs=1e-6)


def test_eigenvalues_come_in_pairs(csc_setup, small_tensors):
    op = _sector(2, csc_setup, small_tensors)
    eigenvalues = np.sort(np.linalg.eigvals(op.matrix).real)
    np.testing.assert_allclose(eigenvalues, -eigenvalues[::-1], atol=1e-8)


def test_mode_records(csc_setup, small_tensors):
    op = _sector(1, csc_setup, small_tensors)
    modes = diagonalize_sector(op, csc_setup[0])
    assert len(modes) == op.dim
    omegas = [m.omega for m in modes]
    assert omegas == sorted(omegas)
    for mode in modes:
        assert 0.0 <= mode.weight_1pe <= 1.0 + 1e-12
        assert mode.weight_1pe + mode.weight_2pe == pytest.approx(1.0)
        assert mode.degeneracy == 3
        assert abs(mode.growth_rate) < 1e-6
    assert list(modes[0].as_row(0.05)) == SPECTRUM_COLUMNS


def test_kohn_mode_survives_interaction(csc_setup, small_tensors):
    modes = diagonalize_sector(_sector(1, csc_setup, small_tensors), csc_setup[0])
    dipole = [m for m in modes if m.label == "dipole"]
    assert len(dipole) == 1
    assert dipole[0].omega == pytest.approx(1.0, abs=1e-2)
    assert any(abs(m.omega - 1.0) < 1e-2 and m.weight_1pe > 0.5 for m in modes)


def test_goldstone_mode_of_coherent_condensate(csc_setup, small_tensors):
    modes = diagonalize_sector(_sector(0, csc_setup, small_tensors), csc_setup[0])
    assert min(abs(m.omega) for m in modes) < GOLDSTONE_TOL
    goldstone = [m for m in modes if m.label == "goldstone"]
    assert goldstone
    assert max(m.generator_overlap for m in goldstone) > 0.5
    assert all(m.label != "goldstone" or abs(m.omega) < GOLDSTONE_TOL for m in modes)


def test_spectrum_is_ordered_and_independent_of_jobs(csc_setup, small_tensors):
    state, bogo = csc_setup
    serial = spectrum([0, 1, 2], state, bogo, small_tensors, s_cut=3, jobs=1)
    parallel = spectrum([0, 1, 2], state, bogo, small_tensors, s_cut=3, jobs=3)
    assert [m.L for m in serial] == sorted(m.L for m in serial)
    np.testing.assert_allclose([m.omega for m in serial], [m.omega for m in parallel], atol=1e-12)


# --------------------------------------------------------------------------------------
# Density fluctuations
# --------------------------------------------------------------------------------------


def test_free_dipole_density_fluctuation(free_setup, small_tensors, small_spec):
    state, _ = free_setup
    op = _sector(1, free_setup, small_tensors)
    modes = diagonalize_sector(op, state)
    one_particle = next(m for m in modes if abs(m.omega - 1.0) < 1e-6 and m.weight_1pe > 0.5)
    r = np.linspace(0.05, 4.0, 60)
    profile = density_fluctuation(one_particle, op, state, r)
    expected = radial_grid_values(small_spec, 0, r)[0] * radial_grid_values(small_spec, 1, r)[0]
    np.testing.assert_allclose(profile / np.max(np.abs(profile)), expected / np.max(np.abs(expected)),
                               atol=1e-10)
