"""
ground.py

Imaginary-time relaxation of the Gaussian state at fixed particle number and the
symplectic (Bogoliubov) diagonalization of the converged mean-field Hamiltonian.

The flow is
    d beta / d tau  = -[(I + 2G^0) eta + 2 F^0 eta*]
    d Gamma / d tau = sigma_z H sigma_z - Gamma H Gamma
for every angular-momentum block. The chemical potential is re-solved each step so
that the particle number relaxes onto the target.
"""

import enum
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.linalg import eig, expm, solve

from .basis import InteractionTensor
from .errors import CollapseError, DivergenceError, DomainError, GaussianBECError
from .gstate import (
    GaussianState,
    MeanFieldBlocks,
    build_mean_field,
    particle_numbers,
    tail_population,
    total_number,
    width,
)

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------------------
# Global configuration constants
# --------------------------------------------------------------------------------------

DEFAULT_DTAU = 0.01
DEFAULT_MAX_DTAU = 1.0
DEFAULT_TOL_ETA = 1e-8
DEFAULT_TOL_GAMMA = 1e-8
DEFAULT_MAX_STEPS = 20000
DEFAULT_MU_TOL = 1e-8
DEFAULT_SEED = 42
DEFAULT_COLLAPSE_WIDTH = 0.3
DEFAULT_RELAX_RATE = 50.0

SEED_MODES = ("auto", "coherent", "squeezed", "noisy")
INTEGRATORS = ("riccati", "euler")

NOISE_LEVEL = 1e-3
GROW_AFTER = 4
GROW_FACTOR = 1.5
MIN_DTAU = 1e-12
NUMBER_SLACK = 1e-2
ENERGY_TOL = 1e-12
SLOPE_FLOOR = 1e-14
RICCATI_SPAN = 5.0
SYMPLECTIC_TOL = 1e-8
LOG_EVERY = 200

CSC_THRESHOLD = 0.99
SSC_THRESHOLD = 0.01
ZERO_MODE_TOL = 1e-8
INSTABILITY_TOL = 1e-8
TAIL_POPULATION_LIMIT = 1e-4
TIE_TOL = 1e-9


class Phase(str, enum.Enum):
    CSC = "CSC"
    SSC = "SSC"
    MIXED = "mixed"


@dataclass(frozen=True)
class SolverConfig:
    """
    Parameters of the fixed-N imaginary-time relaxation.

    Parameters
    ----------
    target_N : float
        Particle number to relax onto.
    a_s : float
        Scattering length in units of a_ho.
    dtau : float
        Initial imaginary-time step (1/omega_ho).
    tol_eta, tol_gamma : float
        Stationarity tolerances on ||eta|| and on the normalized ||d Gamma/d tau||_F.
    max_steps : int
    mu_tol : float
        Relative particle-number tolerance.
    seed_mode : str
        "auto" (coherent and squeezed seeds, lower energy wins), "coherent",
        "squeezed" or "noisy" (squeezed plus seeded noise; "vacuum+noise" is accepted).
    seed : int
        RNG seed for the noisy seed.
    collapse_width : float
        Per-particle width (a_ho) below which the state counts as collapsed.
    relax_rate : float
        Rate at which N is pulled onto target_N per unit imaginary time.
    integrator : str
        "riccati" (exact step of the Gamma flow at frozen H) or "euler".
    max_dtau : float
    """

    target_N: float
    a_s: float = 0.0
    dtau: float = DEFAULT_DTAU
    tol_eta: float = DEFAULT_TOL_ETA
    tol_gamma: float = DEFAULT_TOL_GAMMA
    max_steps: int = DEFAULT_MAX_STEPS
    mu_tol: float = DEFAULT_MU_TOL
    seed_mode: str = "auto"
    seed: int = DEFAULT_SEED
    collapse_width: float = DEFAULT_COLLAPSE_WIDTH
    relax_rate: float = DEFAULT_RELAX_RATE
    integrator: str = "riccati"
    max_dtau: float = DEFAULT_MAX_DTAU

    def __post_init__(self):
        if self.seed_mode == "vacuum+noise":
            object.__setattr__(self, "seed_mode", "noisy")
        if not self.target_N > 0:
            raise DomainError(f"target_N must be positive, got {self.target_N}")
        if not self.dtau > 0 or not self.max_dtau > 0:
            raise DomainError("dtau and max_dtau must be positive")
        for name in ("tol_eta", "tol_gamma", "mu_tol", "relax_rate"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")
        if self.max_steps < 1:
            raise DomainError("max_steps must be at least 1")
        if self.seed_mode not in SEED_MODES:
            raise DomainError(f"unknown seed_mode {self.seed_mode!r}; expected one of {SEED_MODES}")
        if self.integrator not in INTEGRATORS:
            raise DomainError(f"unknown integrator {self.integrator!r}; expected one of {INTEGRATORS}")
        if self.collapse_width < 0:
            raise DomainError("collapse_width must be non-negative")


@dataclass
class ConvergenceReport:
    """Outcome of a relaxation run. Non-convergence is reported here, never raised."""

    steps: int
    converged: bool
    final_eta_norm: float
    final_gamma_residual: float
    mu: float
    N: float
    E: float
    phase: str
    collapsed: bool = False
    seed_mode: str = ""
    dtau: float = 0.0
    message: str = ""
    candidates: list = field(default_factory=list)

    def to_dict(self) -> dict:
        payload = asdict(self)
        payload["candidates"] = [c.to_dict() for c in self.candidates]
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True, eq=False)
class BogoliubovBasis:
    """
    Per-l Bogoliubov transformation of the mean-field Hamiltonian.

    S^l = [[u, v*], [v, u*]] with u^dag u - v^dag v = 1 and S^dag H S = diag(D, D).
    """

    u_blocks: tuple
    v_blocks: tuple
    D: tuple
    zero_modes: tuple = ()
    unstable: tuple = ()

    def symplectic_matrix(self, l: int) -> np.ndarray:
        u, v = self.u_blocks[l], self.v_blocks[l]
        return np.block([[u, v.conj()], [v, u.conj()]])

    def covariance(self, l: int) -> np.ndarray:
        S = self.symplectic_matrix(l)
        return S @ S.conj().T

    def G(self, l: int) -> np.ndarray:
        v = self.v_blocks[l]
        return v.conj() @ v.T

    def F(self, l: int) -> np.ndarray:
        return self.v_blocks[l].conj() @ self.u_blocks[l].T

    @property
    def is_stable(self) -> bool:
        return not self.unstable


# --------------------------------------------------------------------------------------
# Seeds
# --------------------------------------------------------------------------------------


def coherent_seed(spec, config: SolverConfig) -> GaussianState:
    return GaussianState.coherent(spec, config.target_N, a_s=config.a_s)


def squeezed_seed(spec, config: SolverConfig) -> GaussianState:
    return GaussianState.squeezed(spec, config.target_N, a_s=config.a_s)


def noisy_seed(spec, config: SolverConfig) -> GaussianState:
    """Squeezed vacuum in a randomly perturbed s-wave mode plus a small coherent amplitude."""
    rng = np.random.default_rng(config.seed)
    f = np.zeros(spec.nb)
    f[0] = 1.0
    f += NOISE_LEVEL * rng.standard_normal(spec.nb)
    base = GaussianState.squeezed(spec, config.target_N, f, a_s=config.a_s)
    beta = NOISE_LEVEL * math.sqrt(config.target_N) * rng.standard_normal(spec.nb)
    return replace(base, beta=beta)


SEEDS = {"coherent": coherent_seed, "squeezed": squeezed_seed, "noisy": noisy_seed}


# --------------------------------------------------------------------------------------
# Flow
# --------------------------------------------------------------------------------------


def _sigma_z(nb: int) -> np.ndarray:
    return np.diag(np.r_[np.ones(nb), -np.ones(nb)])


def _gamma_flow(gamma: np.ndarray, hamiltonian: np.ndarray) -> np.ndarray:
    sz = _sigma_z(gamma.shape[0] // 2)
    return sz @ hamiltonian @ sz - gamma @ hamiltonian @ gamma


def _symplectic_basis(hamiltonian: np.ndarray):
    """(S, D) with S^dag H S = diag(D, D) and S sigma_z S^dag = sigma_z, or (None, None) unless H > 0."""
    nb = hamiltonian.shape[0] // 2
    try:
        u, v, D, zeros, growing = _diagonalize_block(hamiltonian, 0)
    except (np.linalg.LinAlgError, ValueError):
        return None, None
    if zeros or growing or np.any(D <= 0.0):
        return None, None
    S = np.block([[u, v.conj()], [v, u.conj()]])
    sz = _sigma_z(nb)
    if np.linalg.norm(S @ sz @ S.conj().T - sz) > SYMPLECTIC_TOL * max(1.0, float(np.linalg.norm(S)) ** 2):
        return None, None
    return S, D


def _quasiparticle_step(gamma: np.ndarray, S: np.ndarray, D: np.ndarray, dtau: float) -> np.ndarray:
    """Frozen-H Riccati step in the quasiparticle basis of a positive H; stable for any dtau."""
    dim = gamma.shape[0]
    eye = np.eye(dim)
    sz = _sigma_z(dim // 2)
    S_inv = sz @ S.conj().T @ sz
    local = S_inv @ gamma @ S_inv.conj().T
    c = np.exp(-dtau * np.r_[D, D])
    denominator = np.diag(1.0 + c ** 2) + (1.0 - c ** 2)[:, None] * local
    rest = solve(denominator.T, (eye - local).T).T
    local = eye - 2.0 * c[:, None] * rest * c[None, :]
    gamma = S @ local @ S.conj().T
    return 0.5 * (gamma + gamma.conj().T)


def _riccati_step(gamma: np.ndarray, hamiltonian: np.ndarray, dtau: float) -> np.ndarray:
    """
    Exact step of the Gamma flow at frozen H.

    A positive H is stepped in its quasiparticle basis. Otherwise Gamma = Y X^{-1} with
    d/dtau [X; Y] = [[0, H], [sigma_z H sigma_z, 0]] [X; Y], X(0) = I, Y(0) = Gamma,
    taken in substeps of at most RICCATI_SPAN / ||H||_2.
    """
    S, D = _symplectic_basis(hamiltonian)
    if S is not None:
        return _quasiparticle_step(gamma, S, D, dtau)
    dim = gamma.shape[0]
    sz = _sigma_z(dim // 2)
    h_norm = max(float(np.linalg.norm(hamiltonian, 2)), 1e-12)
    substeps = max(1, math.ceil(dtau * h_norm / RICCATI_SPAN))
    generator = np.block([[np.zeros((dim, dim)), hamiltonian], [sz @ hamiltonian @ sz, np.zeros((dim, dim))]])
    propagator = expm((dtau / substeps) * generator)
    for _ in range(substeps):
        X = propagator[:dim, :dim] + propagator[:dim, dim:] @ gamma
        Y = propagator[dim:, :dim] + propagator[dim:, dim:] @ gamma
        gamma = solve(X.T, Y.T).T
    return gamma


def _blocks_from_gamma(gamma: np.ndarray):
    nb = gamma.shape[0] // 2
    G = 0.5 * (gamma[:nb, :nb] - np.eye(nb))
    F = 0.5 * gamma[:nb, nb:]
    return 0.5 * (G + G.conj().T), 0.5 * (F + F.T)


def _coherent_step(state: GaussianState, mf0: MeanFieldBlocks, mu: float, dtau: float, integrator: str):
    beta = state.beta
    nb = state.spec.nb
    if integrator == "euler":
        eta = mf0.eta - mu * beta
        return beta - dtau * ((np.eye(nb) + 2 * state.G[0]) @ eta + 2 * state.F[0] @ eta.conj())
    if not np.any(beta):
        return beta
    # [beta; beta*] evolves under -Gamma^0 (K - mu) with the fields frozen
    stacked = np.r_[beta, beta.conj()]
    stacked = expm(-dtau * (state.covariance(0) @ mf0.drive(mu))) @ stacked
    return stacked[:nb]


def _advance(state: GaussianState, mf0: MeanFieldBlocks, mu: float, dtau: float, integrator: str):
    """
    One step from mean-field blocks evaluated at mu = 0, with the flow taken at mu.

    Raises
    ------
    DivergenceError
        If a linear solve fails or the stepped state is not finite.
    """
    spec = state.spec
    nb = spec.nb
    shift = mu * np.eye(2 * nb)
    G_new, F_new = [], []
    try:
        beta_new = _coherent_step(state, mf0, mu, dtau, integrator)
        for l in range(spec.l_max + 1):
            hamiltonian = mf0.hamiltonian(l) - shift
            gamma = state.covariance(l)
            if integrator == "euler":
                gamma = gamma + dtau * _gamma_flow(gamma, hamiltonian)
            else:
                gamma = _riccati_step(gamma, hamiltonian, dtau)
            G, F = _blocks_from_gamma(gamma)
            G_new.append(G)
            F_new.append(F)
    except (np.linalg.LinAlgError, ValueError) as error:
        raise DivergenceError(
            f"step failed | mu: {mu:.6g} | dtau: {dtau:.3g} | {error}", state=state, reason="linalg"
        ) from error
    new_state = replace(state, beta=beta_new, G=tuple(G_new), F=tuple(F_new), mu=float(mu))
    if not _is_finite(new_state):
        raise DivergenceError(f"non-finite state | mu: {mu:.6g} | dtau: {dtau:.3g}", state=state)
    return new_state


def imaginary_step(state: GaussianState, tensors: InteractionTensor, dtau: float, integrator: str = "euler"):
    """
    One imaginary-time step at the state's chemical potential.

    Parameters
    ----------
    state : GaussianState
    tensors : InteractionTensor
    dtau : float
        Step size (1/omega_ho).
    integrator : {"euler", "riccati"}
        Explicit Euler for beta and Gamma, or the exact frozen-field steps
        (matrix exponential for beta, Riccati solution for Gamma).

    Returns
    -------
    GaussianState
        Updated state with G Hermitian and F symmetric.

    Raises
    ------
    DivergenceError
        If the update produces non-finite values.
    """
    if not dtau > 0:
        raise DomainError(f"dtau must be positive, got {dtau}")
    mf0 = build_mean_field(state.with_mu(0.0), tensors)
    try:
        return _advance(state, mf0, state.mu, dtau, integrator)
    except DivergenceError as error:
        raise DivergenceError(str(error), step=1, state=state, reason=error.reason) from error


def _is_finite(state: GaussianState) -> bool:
    arrays = (state.beta,) + state.G + state.F
    return all(np.all(np.isfinite(a)) for a in arrays)


def gamma_residual(state: GaussianState, mf0: MeanFieldBlocks, mu: float, normalized: bool = True) -> float:
    """Frobenius norm of d Gamma/d tau over all l, optionally divided by max(1, ||Gamma||_2^2)."""
    nb = state.spec.nb
    total = 0.0
    scale = 1.0
    for l in range(state.spec.l_max + 1):
        gamma = state.covariance(l)
        flow = _gamma_flow(gamma, mf0.hamiltonian(l) - mu * np.eye(2 * nb))
        total += float(np.sum(np.abs(flow) ** 2))
        scale = max(scale, float(np.linalg.norm(gamma, 2)) ** 2)
    residual = math.sqrt(total)
    return residual / scale if normalized else residual


def stationarity_residual(state: GaussianState, tensors: InteractionTensor) -> float:
    """Frobenius norm of sigma_z H sigma_z - Gamma H Gamma at the state's chemical potential."""
    mf0 = build_mean_field(state.with_mu(0.0), tensors)
    return gamma_residual(state, mf0, state.mu, normalized=False)


def _hamiltonian_scale(state: GaussianState, mf0: MeanFieldBlocks) -> float:
    return max(float(np.linalg.norm(mf0.hamiltonian(l), 2)) for l in range(state.spec.l_max + 1))


def _euler_cap(state: GaussianState, h_norm: float) -> float:
    """Stability bound 0.5 / (||Gamma||_2^2 ||H||_2) of the explicit step."""
    g_norm = max(float(np.linalg.norm(state.covariance(l), 2)) for l in range(state.spec.l_max + 1))
    return 0.5 / (g_norm ** 2 * max(h_norm, 1e-12))


def _number_rate(state: GaussianState, mf0: MeanFieldBlocks, mu: float) -> float:
    """dN/dtau of the continuous flow at chemical potential mu."""
    nb = state.spec.nb
    beta = state.beta
    eta = mf0.eta - mu * beta
    velocity = -((np.eye(nb) + 2 * state.G[0]) @ eta + 2 * state.F[0] @ eta.conj())
    rate = 2.0 * float(np.real(np.vdot(beta, velocity)))
    for l in range(state.spec.l_max + 1):
        flow = _gamma_flow(state.covariance(l), mf0.hamiltonian(l) - mu * np.eye(2 * nb))
        rate += (2 * l + 1) * 0.5 * float(np.real(np.trace(flow[:nb, :nb])))
    return rate


def _chemical_potential(state: GaussianState, mf0: MeanFieldBlocks, wanted_rate: float, fallback: float, bound: float):
    """
    Chemical potential at which the flow changes N at wanted_rate.

    dN/dtau is affine in mu with a non-negative slope, so mu follows from two rate
    evaluations. The result is clipped to [-bound, bound]; a vanishing slope keeps
    the fallback.
    """
    at_zero = _number_rate(state, mf0, 0.0)
    slope = _number_rate(state, mf0, 1.0) - at_zero
    if not np.isfinite(slope) or slope <= SLOPE_FLOOR * (1.0 + abs(at_zero)):
        return float(fallback)
    return float(np.clip((wanted_rate - at_zero) / slope, -bound, bound))


def _grand_energy(mf0: MeanFieldBlocks, state: GaussianState, mu: float) -> float:
    return mf0.energy - mu * total_number(state)


def relax(seed: GaussianState, config: SolverConfig, tensors: InteractionTensor, label: str = ""):
    """
    Fixed-N imaginary-time relaxation from one seed.

    Every step picks the chemical potential that pulls N onto target_N at relax_rate,
    takes the frozen-field step and accepts it only if the grand energy E - mu N does
    not rise and N does not drift away. Rejected steps halve dtau; runs of accepted
    steps grow it up to max_dtau.

    Returns
    -------
    (GaussianState, ConvergenceReport)

    Raises
    ------
    CollapseError
        If the width drops below config.collapse_width, the basis tail fills up or
        the step size underflows on failing steps in the attractive regime.
    DivergenceError
        If the step size underflows on failing steps otherwise.
    """
    state = seed.with_a_s(config.a_s)
    target = config.target_N
    error_cls = CollapseError if config.a_s < 0 else DivergenceError
    mf0 = build_mean_field(state.with_mu(0.0), tensors)
    mu = _chemical_potential(state, mf0, 0.0, state.mu, 2.0 * _hamiltonian_scale(state, mf0) + 1.0)
    dtau = min(config.dtau, config.max_dtau)
    accepted_in_row = 0
    eta_norm = gamma_res = math.inf
    converged = False
    message = "max_steps exceeded"
    step = 0

    for step in range(1, config.max_steps + 1):
        scale = _hamiltonian_scale(state, mf0)
        if config.integrator == "euler":
            dtau = min(dtau, _euler_cap(state, scale + abs(mu)))
        N = total_number(state)
        miss = N - target
        wanted = -miss * min(1.0, config.relax_rate * dtau) / dtau
        mu_step = _chemical_potential(state, mf0, wanted, mu, 2.0 * scale + 1.0)

        failure = None
        try:
            candidate = _advance(state, mf0, mu_step, dtau, config.integrator)
            mf_new = build_mean_field(candidate.with_mu(0.0), tensors)
            if not np.isfinite(mf_new.energy):
                raise DivergenceError("non-finite energy", state=state)
        except DivergenceError as error:
            failure = error
            accepted = False
        else:
            N_new = total_number(candidate)
            drifted = abs(N_new - target) > max(NUMBER_SLACK * target, 2.0 * abs(miss))
            uphill = _grand_energy(mf_new, candidate, mu_step) > _grand_energy(mf0, state, mu_step) + ENERGY_TOL * (
                1.0 + abs(mf0.energy)
            )
            accepted = not (drifted or uphill)

        if not accepted:
            dtau *= 0.5
            accepted_in_row = 0
            if dtau < MIN_DTAU:
                if failure is not None:
                    raise error_cls(f"step size underflow at step {step}: {failure}", step=step, state=state) from failure
                message = "step size underflow"
                break
            continue

        state_width = width(candidate)
        if config.a_s < 0 and (
            state_width < config.collapse_width or tail_population(candidate) > TAIL_POPULATION_LIMIT
        ):
            raise CollapseError(
                f"collapse at step {step} | width: {state_width:.4f} | tail: {tail_population(candidate):.3e}",
                step=step,
                state=state,
            )

        state, mf0 = candidate, mf_new
        accepted_in_row += 1
        if accepted_in_row >= GROW_AFTER:
            dtau = min(dtau * GROW_FACTOR, config.max_dtau)
            accepted_in_row = 0

        mu = _chemical_potential(state, mf0, 0.0, mu_step, 2.0 * _hamiltonian_scale(state, mf0) + 1.0)
        eta_norm = float(np.linalg.norm(mf0.eta - mu * state.beta))
        gamma_res = gamma_residual(state, mf0, mu)
        n_error = abs(total_number(state) - target) / target
        if step % LOG_EVERY == 0:
            logger.debug(
                "seed: %s | step: %d | E: %.10g | mu: %.8g | eta: %.3e | gamma: %.3e | dtau: %.3e",
                label, step, mf0.energy, mu, eta_norm, gamma_res, dtau,
            )
        if eta_norm < config.tol_eta and gamma_res < config.tol_gamma and n_error < config.mu_tol:
            converged = True
            message = "converged"
            break

    state = state.with_mu(mu)
    N = total_number(state)
    report = ConvergenceReport(
        steps=step,
        converged=converged,
        final_eta_norm=eta_norm,
        final_gamma_residual=gamma_res,
        mu=float(mu),
        N=N,
        E=float(mf0.energy),
        phase=detect_phase(state).value,
        seed_mode=label,
        dtau=dtau,
        message=message,
    )
    return state, report


def _run_seed(mode, spec, config, tensors):
    seed = SEEDS[mode](spec, config)
    try:
        state, report = relax(seed, config, tensors, label=mode)
    except CollapseError as error:
        logger.warning("seed: %s | collapsed at step %s", mode, error.step)
        return None, error
    except GaussianBECError as error:
        logger.warning("seed: %s | failed at step %s: %s", mode, getattr(error, "step", None), error)
        return None, error
    return state, report


def _beats(report: ConvergenceReport, incumbent: ConvergenceReport) -> bool:
    """Converged beats unconverged; otherwise lower E/N wins and ties keep the incumbent."""
    if report.converged != incumbent.converged:
        return report.converged
    mine, theirs = report.E / report.N, incumbent.E / incumbent.N
    return mine < theirs - TIE_TOL * max(1.0, abs(theirs))


def solve_ground(config: SolverConfig, tensors: InteractionTensor):
    """
    Ground state at fixed N by imaginary-time relaxation from one or more seeds.

    With seed_mode "auto" the coherent and squeezed seeds run concurrently and the
    lower converged energy wins (converged runs are preferred over unconverged ones,
    ties within 1e-9 relative keep the coherent seed).

    Parameters
    ----------
    config : SolverConfig
    tensors : InteractionTensor

    Returns
    -------
    (GaussianState, ConvergenceReport)
        The report lists every seed's report in `candidates`.

    Raises
    ------
    CollapseError
        If every seed collapsed; carries the last stable iterate.
    DivergenceError
        If every seed diverged for another reason.
    """
    spec = tensors.spec
    modes = ("coherent", "squeezed") if config.seed_mode == "auto" else (config.seed_mode,)
    with ThreadPoolExecutor(max_workers=len(modes)) as pool:
        outcomes = list(pool.map(lambda mode: _run_seed(mode, spec, config, tensors), modes))

    finished = [(s, r) for s, r in outcomes if s is not None]
    if not finished:
        errors = [r for _, r in outcomes]
        collapse = next((e for e in errors if isinstance(e, CollapseError)), None)
        raise collapse if collapse is not None else errors[0]

    best_state, best_report = finished[0]
    for state, report in finished[1:]:
        if _beats(report, best_report):
            best_state, best_report = state, report
    reports = []
    for (state, outcome), mode in zip(outcomes, modes):
        if state is not None:
            reports.append(outcome)
        else:
            reports.append(
                ConvergenceReport(
                    steps=getattr(outcome, "step", None) or 0, converged=False, final_eta_norm=math.nan,
                    final_gamma_residual=math.nan, mu=math.nan, N=math.nan, E=math.nan,
                    phase="", collapsed=isinstance(outcome, CollapseError), seed_mode=mode,
                    message=str(outcome),
                )
            )
    report = replace(best_report, candidates=reports)
    logger.info(
        "target_N: %.6g | a_s: %.6g | seed: %s | phase: %s | E/N: %.10g | converged: %s",
        config.target_N, config.a_s, report.seed_mode, report.phase, report.E / report.N, report.converged,
    )
    return best_state, report


# --------------------------------------------------------------------------------------
# Bogoliubov basis
# --------------------------------------------------------------------------------------


def _diagonalize_block(hamiltonian: np.ndarray, l: int):
    nb = hamiltonian.shape[0] // 2
    sz = _sigma_z(nb)
    omega, vectors = eig(sz @ hamiltonian)
    norms = np.real(np.einsum("ij,ij->j", vectors.conj(), sz @ vectors))

    unstable = [(l, complex(w)) for w in omega if abs(w.imag) > INSTABILITY_TOL]
    positive = [j for j in range(2 * nb) if norms[j] > ZERO_MODE_TOL]
    if len(positive) < nb:
        rest = [j for j in range(2 * nb) if abs(norms[j]) <= ZERO_MODE_TOL and omega[j].real >= 0]
        positive += rest[: nb - len(positive)]
    positive = sorted(positive, key=lambda j: omega[j].real)[:nb]

    W = vectors[:, positive].astype(complex)
    D = np.real(omega[positive])
    zero_modes = []
    for col, j in enumerate(positive):
        if norms[j] > ZERO_MODE_TOL:
            W[:, col] /= math.sqrt(norms[j])
        else:
            # indeterminate symplectic norm: unit Euclidean norm instead
            W[:, col] /= np.linalg.norm(W[:, col])
            zero_modes.append((l, col))
        if abs(omega[j]) < ZERO_MODE_TOL and (l, col) not in zero_modes:
            zero_modes.append((l, col))
    # fix the phase so the largest u component is real positive
    for col in range(nb):
        pivot = np.argmax(np.abs(W[:nb, col])) if np.linalg.norm(W[:nb, col]) > 0 else np.argmax(np.abs(W[:, col]))
        W[:, col] *= np.exp(-1j * np.angle(W[pivot, col]))
    return W[:nb], W[nb:], D, zero_modes, unstable


def symplectic_diagonalize(mean_field: MeanFieldBlocks) -> BogoliubovBasis:
    """
    Bogoliubov transformation of each mean-field block.

    Eigen-decomposes sigma_z H^l, keeps the positive-norm branch and scales every
    column so that u^dag u - v^dag v = 1.

    Parameters
    ----------
    mean_field : MeanFieldBlocks
        Blocks of a converged state (at its chemical potential).

    Returns
    -------
    BogoliubovBasis
        Zero modes (|omega| < 1e-8 or indeterminate norm) are listed in `zero_modes`
        and complex frequencies in `unstable`; both are also logged.
    """
    u_blocks, v_blocks, energies, zero_modes, unstable = [], [], [], [], []
    for l in range(len(mean_field.E_blocks)):
        u, v, D, zeros, growing = _diagonalize_block(mean_field.hamiltonian(l), l)
        u_blocks.append(u)
        v_blocks.append(v)
        energies.append(D)
        zero_modes += zeros
        unstable += growing
    if zero_modes:
        logger.warning("zero modes flagged: %s", zero_modes)
    if unstable:
        logger.warning("dynamical instability: %d complex eigenvalues", len(unstable))
    return BogoliubovBasis(tuple(u_blocks), tuple(v_blocks), tuple(energies), tuple(zero_modes), tuple(unstable))


def detect_phase(state: GaussianState) -> Phase:
    """CSC if N_c/N > 0.99, SSC if N_c/N < 0.01, mixed otherwise."""
    n_c, n_d = particle_numbers(state)
    total = n_c + n_d
    if total <= 0.0:
        raise DomainError("phase of an empty state is undefined")
    fraction = n_c / total
    if fraction > CSC_THRESHOLD:
        return Phase.CSC
    if fraction < SSC_THRESHOLD:
        return Phase.SSC
    return Phase.MIXED
