import json
import math

import numpy as np
import pytest

from gaussian_bec.basis import BasisSpec, InteractionTensor
from gaussian_bec.errors import CollapseError, DivergenceError, DomainError
from gaussian_bec.fluct import GOLDSTONE_TOL, spectrum
from gaussian_bec.gpe import collapse_threshold, solve_effective
from gaussian_bec.ground import (
    Phase,
    SolverConfig,
    detect_phase,
    gamma_residual,
    imaginary_step,
    noisy_seed,
    solve_ground,
    stationarity_residual,
    symplectic_diagonalize,
    _chemical_potential,
    _number_rate,
)
from gaussian_bec.gstate import (
    GaussianState,
    build_mean_field,
    extract_squeezed_mode,
    g2_local,
    particle_numbers,
    total_energy,
    total_number,
    width,
)


# --------------------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------------------


def test_solver_config_defaults():
    config = SolverConfig(target_N=10.0)
    assert config.tol_eta == 1e-8
    assert config.seed == 42
    assert config.seed_mode == "auto"


def test_vacuum_noise_alias():
    assert SolverConfig(target_N=10.0, seed_mode="vacuum+noise").seed_mode == "noisy"


@pytest.mark.parametrize("kwargs", [
    {"target_N": 0.0},
    {"target_N": 10.0, "dtau": -0.1},
    {"target_N": 10.0, "seed_mode": "random"},
    {"target_N": 10.0, "integrator": "rk4"},
    {"target_N": 10.0, "max_steps": 0},
])
def test_solver_config_validation(kwargs):
    with pytest.raises(DomainError):
        SolverConfig(**kwargs)


def test_noisy_seed_is_physical_and_reproducible(small_spec):
    config = SolverConfig(target_N=20.0, seed_mode="noisy", seed=3)
    first, second = noisy_seed(small_spec, config), noisy_seed(small_spec, config)
    assert first.is_physical()
    np.testing.assert_array_equal(first.beta, second.beta)
    assert total_number(first) == pytest.approx(20.0, rel=1e-2)


# --------------------------------------------------------------------------------------
# Flow
# --------------------------------------------------------------------------------------


def test_step_rejects_non_positive_dtau(small_spec, small_tensors):
    with pytest.raises(DomainError):
        imaginary_step(GaussianState.coherent(small_spec, 10.0), small_tensors, 0.0)


def test_vacuum_is_a_fixed_point(small_spec, small_tensors):
    state = GaussianState.vacuum(small_spec, mu=1.0, a_s=0.01)
    stepped = imaginary_step(state, small_tensors, 0.01)
    assert np.linalg.norm(stepped.beta) == 0.0
    for G in stepped.G:
        assert np.allclose(G, 0.0)


@pytest.mark.parametrize("integrator", ["euler", "riccati"])
def test_step_lowers_grand_energy(small_spec, small_tensors, integrator):
    f = np.zeros(small_spec.nb)
    f[:2] = [1.0, 0.4]
    state = GaussianState.squeezed(small_spec, 2.0, f, mu=1.5, a_s=0.01)
    state = GaussianState(small_spec, 0.5 * f, state.G, state.F, 1.5, 0.01)
    stepped = imaginary_step(state, small_tensors, 0.001, integrator=integrator)
    assert total_energy(stepped, small_tensors) < total_energy(state, small_tensors)


def test_riccati_step_keeps_squeezed_state_pure(small_spec, small_tensors):
    state = GaussianState.squeezed(small_spec, 50.0, mu=1.4, a_s=-0.001)
    stepped = imaginary_step(state, small_tensors, 0.05, integrator="riccati")
    for l in range(small_spec.l_max + 1):
        nb = small_spec.nb
        sigma_z = np.diag(np.r_[np.ones(nb), -np.ones(nb)])
        product = stepped.covariance(l) @ sigma_z
        np.testing.assert_allclose(product @ product, np.eye(2 * nb), atol=1e-6)


def test_euler_and_exact_steps_agree_at_small_dtau(small_spec, small_tensors):
    f = np.zeros(small_spec.nb)
    f[:2] = [1.0, 0.3]
    base = GaussianState.squeezed(small_spec, 0.5, f, mu=1.6, a_s=0.01)
    state = GaussianState(small_spec, f, base.G, base.F, 1.6, 0.01)
    euler = imaginary_step(state, small_tensors, 1e-3, integrator="euler")
    exact = imaginary_step(state, small_tensors, 1e-3, integrator="riccati")
    assert np.linalg.norm(euler.beta - exact.beta) < 1e-2 * np.linalg.norm(exact.beta - state.beta)
    gap = sum(np.linalg.norm(euler.covariance(l) - exact.covariance(l)) for l in range(small_spec.l_max + 1))
    moved = sum(np.linalg.norm(exact.covariance(l) - state.covariance(l)) for l in range(small_spec.l_max + 1))
    assert gap < 1e-2 * moved


def test_exact_step_is_stable_for_large_dtau(small_spec, small_tensors):
    state = GaussianState.squeezed(small_spec, 20.0, mu=0.5)
    stepped = imaginary_step(state, small_tensors, 50.0, integrator="riccati")
    assert total_number(stepped) < 1e-6
    assert stepped.is_physical(tol=1e-8)


def test_step_failures_surface_as_divergence(small_spec, small_tensors):
    state = GaussianState.coherent(small_spec, 10.0, a_s=0.01)
    broken = GaussianState(small_spec, state.beta * np.nan, state.G, state.F, 1.5, 0.01)
    with pytest.raises(DivergenceError) as info:
        imaginary_step(broken, small_tensors, 0.01, integrator="riccati")
    assert info.value.step == 1


def test_number_rate_is_affine_in_mu(small_spec, small_tensors, rng):
    f = rng.standard_normal(small_spec.nb)
    base = GaussianState.squeezed(small_spec, 4.0, f, a_s=0.01)
    state = GaussianState(small_spec, rng.standard_normal(small_spec.nb), base.G, base.F, 0.0, 0.01)
    mf0 = build_mean_field(state, small_tensors)
    at_zero, at_one = _number_rate(state, mf0, 0.0), _number_rate(state, mf0, 1.0)
    assert at_one > at_zero
    scale = abs(at_zero) + abs(at_one)
    assert _number_rate(state, mf0, 0.7) == pytest.approx(at_zero + 0.7 * (at_one - at_zero), abs=1e-9 * scale)
    mu = _chemical_potential(state, mf0, 3.0, 0.0, 1e6)
    assert _number_rate(state, mf0, mu) == pytest.approx(3.0, abs=1e-8 * scale)
    assert _chemical_potential(state, mf0, 1e12, 0.0, 2.0) == 2.0


# --------------------------------------------------------------------------------------
# Ground states
# --------------------------------------------------------------------------------------


def test_free_gas_ground_state(free_ground):
    state, report = free_ground
    n_c, n_d = particle_numbers(state)
    assert report.converged
    assert report.E / report.N == pytest.approx(1.5, abs=1e-6)
    assert n_c / (n_c + n_d) == pytest.approx(1.0, abs=1e-8)
    assert report.mu == pytest.approx(1.5, abs=1e-6)
    assert detect_phase(state) is Phase.CSC


def test_free_gas_is_stationary(free_ground, small_tensors):
    state, _ = free_ground
    assert stationarity_residual(state, small_tensors) < 1e-6


def test_auto_seed_prefers_coherent_on_ties(small_tensors):
    state, report = solve_ground(SolverConfig(target_N=50.0, a_s=0.0), small_tensors)
    assert report.seed_mode == "coherent"
    assert len(report.candidates) == 2
    assert report.E / report.N == pytest.approx(1.5, abs=1e-6)


def test_report_serializes(free_ground):
    _, report = free_ground
    payload = json.loads(report.to_json())
    assert payload["converged"] is True
    assert payload["phase"] == "CSC"


def test_csc_matches_gross_pitaevskii(csc_ground, small_spec):
    state, report = csc_ground
    N = 1.0e4
    mode, _, energy = solve_effective(N, 0.05 / N, 1, small_spec)
    assert report.converged
    assert detect_phase(state) is Phase.CSC
    assert report.E / report.N == pytest.approx(energy, rel=1e-2)
    assert width(state) == pytest.approx(mode.width, rel=1e-2)
    assert g2_local(state, 0.0) == pytest.approx(1.0, abs=1e-3)


def test_converged_state_has_small_residuals(csc_ground, small_tensors):
    state, report = csc_ground
    mf0 = build_mean_field(state.with_mu(0.0), small_tensors)
    assert report.converged
    assert report.final_eta_norm < 1e-9
    assert gamma_residual(state, mf0, state.mu) < 1e-9
    assert abs(total_number(state) - 1.0e4) < 1e-10 * 1.0e4


def test_coherent_seed_converges_without_stalling(small_tensors):
    N = 100.0
    state, report = solve_ground(SolverConfig(target_N=N, a_s=0.05 / N, seed_mode="coherent", max_steps=5000),
                                 small_tensors)
    assert report.converged
    assert report.dtau > 0.1
    n_c, n_d = particle_numbers(state)
    assert n_c / (n_c + n_d) > 0.95
    assert n_d > 0.0


def test_squeezed_seed_relaxes_in_the_attractive_regime(small_tensors):
    N = 100.0
    state, report = solve_ground(SolverConfig(target_N=N, a_s=-0.05 / N, seed_mode="squeezed", max_steps=3000),
                                 small_tensors)
    assert math.isfinite(report.mu)
    assert state.is_physical(tol=1e-6)
    assert total_number(state) == pytest.approx(N, rel=1e-6)
    assert detect_phase(state) is Phase.SSC
    assert report.E / report.N < 1.5


def test_auto_seeds_at_attraction_report_both_candidates(small_tensors):
    N = 100.0
    _, report = solve_ground(SolverConfig(target_N=N, a_s=-0.05 / N, max_steps=500), small_tensors)
    assert [c.seed_mode for c in report.candidates] == ["coherent", "squeezed"]
    assert all(math.isfinite(c.E) for c in report.candidates)


def test_euler_relaxation_at_small_steps(tiny_tensors):
    N = 10.0
    config = SolverConfig(target_N=N, a_s=0.05 / N, seed_mode="coherent", integrator="euler", dtau=1e-3,
                          max_steps=2000)
    seed_energy = total_energy(GaussianState.coherent(tiny_tensors.spec, N, a_s=config.a_s), tiny_tensors)
    state, report = solve_ground(config, tiny_tensors)
    assert report.E < seed_energy
    assert total_number(state) == pytest.approx(N, rel=1e-6)
    assert state.is_physical(tol=1e-6)


def test_bogoliubov_basis_is_symplectic(csc_ground, small_tensors):
    state, _ = csc_ground
    bogo = symplectic_diagonalize(build_mean_field(state, small_tensors))
    assert bogo.is_stable
    for l in (1, 2):
        u, v = bogo.u_blocks[l], bogo.v_blocks[l]
        np.testing.assert_allclose(u.conj().T @ u - v.conj().T @ v, np.eye(u.shape[0]), atol=1e-8)
        assert np.all(bogo.D[l] > 0)
        # the relaxed state is the quasiparticle vacuum
        np.testing.assert_allclose(bogo.covariance(l), state.covariance(l), atol=1e-6)


def test_free_bogoliubov_energies(free_ground, small_tensors):
    state, _ = free_ground
    bogo = symplectic_diagonalize(build_mean_field(state, small_tensors))
    for l in range(3):
        np.testing.assert_allclose(bogo.D[l], 2.0 * np.arange(7) + l, atol=1e-6)


def test_phase_detection(small_spec):
    assert detect_phase(GaussianState.coherent(small_spec, 10.0)) is Phase.CSC
    assert detect_phase(GaussianState.squeezed(small_spec, 10.0)) is Phase.SSC
    with pytest.raises(DomainError):
        detect_phase(GaussianState.vacuum(small_spec))


@pytest.mark.slow
def test_transition_to_squeezed_condensate(small_tensors):
    N = 1.0e4
    couplings = [round(0.02 - 0.005 * k, 3) for k in range(9)]
    fractions = []
    for na_s in couplings:
        state, report = solve_ground(SolverConfig(target_N=N, a_s=na_s / N, tol_eta=1e-7, tol_gamma=1e-7,
                                                  max_dtau=100.0), small_tensors)
        n_c, n_d = particle_numbers(state)
        fractions.append(n_c / (n_c + n_d))
    for na_s, fraction in zip(couplings, fractions):
        if na_s >= 0.0:
            assert fraction > 0.99, na_s
        else:
            assert fraction < 0.01, na_s
    jumps = [k for k in range(len(fractions) - 1) if fractions[k] - fractions[k + 1] > 0.9]
    assert [couplings[k] for k in jumps] == [0.0]


@pytest.mark.slow
def test_squeezed_condensate_structure(small_tensors, small_spec):
    N = 100.0
    na_s = -0.1
    state, report = solve_ground(SolverConfig(target_N=N, a_s=na_s / N, max_dtau=100.0), small_tensors)
    assert report.converged
    assert detect_phase(state) is Phase.SSC
    f, xi0, residual = extract_squeezed_mode(state)
    _, n_d = particle_numbers(state)
    singular = np.linalg.svd(state.F[0], compute_uv=False)[0]
    assert residual < 1e-3
    assert xi0 == pytest.approx(math.asinh(math.sqrt(n_d)), rel=1e-12)
    assert singular == pytest.approx(math.sqrt(n_d * (n_d + 1.0)), rel=1e-3)
    assert g2_local(state, 0.0) == pytest.approx(3.0 + 1.0 / N, rel=1e-2)
    _, _, energy = solve_effective(N, na_s / N, 3, small_spec)
    assert report.E / report.N == pytest.approx(energy, rel=1e-2)


@pytest.mark.slow
def test_squeezed_condensate_goldstone_and_dipole_modes():
    tensors = InteractionTensor.build(BasisSpec(n_cut=15, l_max=1))
    N = 100.0
    config = SolverConfig(target_N=N, a_s=-0.1 / N, seed_mode="squeezed", tol_eta=1e-10, tol_gamma=1e-10,
                          mu_tol=1e-10, max_dtau=100.0)
    state, report = solve_ground(config, tensors)
    assert report.converged
    bogo = symplectic_diagonalize(build_mean_field(state, tensors))
    modes = spectrum([0, 1], state, bogo, tensors, jobs=2)
    monopole = [m for m in modes if m.L == 0]
    dipole = [m for m in modes if m.L == 1]
    assert min(abs(m.omega) for m in monopole) < GOLDSTONE_TOL
    lowest = min(dipole, key=lambda m: m.omega)
    assert lowest.omega == pytest.approx(1.0, abs=5e-2)
    assert lowest.weight_2pe > 0.5
    assert all(m.omega > lowest.omega for m in monopole if abs(m.omega) >= GOLDSTONE_TOL)


@pytest.mark.slow
def test_breathing_mode_softens_toward_zero_coupling(small_tensors):
    N = 100.0
    frequencies = []
    for na_s in (0.2, 0.1, 0.05):
        config = SolverConfig(target_N=N, a_s=na_s / N, seed_mode="coherent", tol_eta=1e-10, tol_gamma=1e-10,
                              mu_tol=1e-10, max_dtau=100.0)
        state, report = solve_ground(config, small_tensors)
        assert report.converged
        bogo = symplectic_diagonalize(build_mean_field(state, small_tensors))
        modes = spectrum([0], state, bogo, small_tensors)
        breathing = next(m for m in modes if m.label == "breathing")
        assert breathing.weight_2pe > 0.5
        frequencies.append(breathing.omega)
    assert frequencies[0] > frequencies[1] > frequencies[2] > 0.0


@pytest.mark.slow
def test_collapse_follows_squeezed_mode_threshold():
    spec = BasisSpec(n_cut=10, l_max=1)
    tensors = InteractionTensor.build(spec)
    k3 = collapse_threshold(3, spec)
    N = 100.0
    stable = SolverConfig(target_N=N, a_s=-(k3 - 0.04) / N, seed_mode="squeezed", max_dtau=100.0)
    state, _ = solve_ground(stable, tensors)
    assert detect_phase(state) is Phase.SSC
    beyond = SolverConfig(target_N=N, a_s=-(k3 + 0.05) / N, seed_mode="squeezed", max_dtau=100.0)
    with pytest.raises(CollapseError):
        solve_ground(beyond, tensors)


@pytest.mark.slow
def test_strong_attraction_collapses(small_tensors):
    config = SolverConfig(target_N=100.0, a_s=-1.0 / 100.0, seed_mode="squeezed", max_steps=5000)
    with pytest.raises(CollapseError) as info:
        solve_ground(config, small_tensors)
    assert info.value.state is not None
    assert info.value.state.is_physical(tol=1e-6)
