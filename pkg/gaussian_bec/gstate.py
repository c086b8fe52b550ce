"""
gstate.py

Gaussian variational state in the projected oscillator basis and its derived quantities:
mean-field blocks, driving vector, energy, particle numbers, widths, local g2
and the single squeezed mode carried by the depleted cloud.

Conventions
-----------
G^l_{nn'} = <a^dag_{n'lm} a_{nlm}> and F^l_{nn'} = (-1)^m <a_{n'l-m} a_{nlm}>, both independent of m,
so only one block per l is stored. The coherent amplitude lives in the l = 0 sector.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.linalg import eigh, eigvals

from .basis import BasisSpec, InteractionTensor, level_energies, radial_grid_values, radial_moment_matrix
from .errors import DomainError, NoSqueezedModeError

logger = logging.getLogger(__name__)


PHYSICALITY_TOL = 1e-8
MIN_DEPLETION = 1e-9
MIN_DENSITY = 1e-300


@dataclass(frozen=True, eq=False)
class GaussianState:
    """
    Coherent amplitudes plus normal (G) and anomalous (F) covariance blocks per l.

    Parameters
    ----------
    spec : BasisSpec
    beta : np.ndarray
        Coherent coefficients beta_n, shape (nb,), units sqrt(particles).
    G, F : tuple of np.ndarray
        One (nb, nb) block per l = 0..l_max; G Hermitian, F symmetric.
    mu : float
        Chemical potential (hbar*omega_ho).
    a_s : float
        Scattering length (a_ho) the state is evaluated with.
    """

    spec: BasisSpec
    beta: np.ndarray
    G: tuple
    F: tuple
    mu: float = 0.0
    a_s: float = 0.0

    def __post_init__(self):
        nb = self.spec.nb
        beta = np.asarray(self.beta, dtype=complex)
        if beta.shape != (nb,):
            raise DomainError(f"beta has shape {beta.shape}, expected ({nb},)")
        if len(self.G) != self.spec.l_max + 1 or len(self.F) != self.spec.l_max + 1:
            raise DomainError("one G and one F block per angular momentum required")
        G = tuple(np.asarray(g, dtype=complex) for g in self.G)
        F = tuple(np.asarray(f, dtype=complex) for f in self.F)
        for block in G + F:
            if block.shape != (nb, nb):
                raise DomainError(f"covariance block has shape {block.shape}, expected ({nb}, {nb})")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "F", F)

    # ---------------------------------------------------------------- constructors

    @classmethod
    def vacuum(cls, spec: BasisSpec, mu: float = 0.0, a_s: float = 0.0):
        nb = spec.nb
        zeros = tuple(np.zeros((nb, nb), dtype=complex) for _ in range(spec.l_max + 1))
        return cls(spec, np.zeros(nb, dtype=complex), zeros, zeros, mu, a_s)

    @classmethod
    def coherent(cls, spec: BasisSpec, N: float, f=None, mu: float = 0.0, a_s: float = 0.0):
        """All N particles in the coherent mode f (default: the oscillator ground state)."""
        f = _unit_mode(spec, f)
        state = cls.vacuum(spec, mu, a_s)
        return replace(state, beta=math.sqrt(N) * f)

    @classmethod
    def squeezed(cls, spec: BasisSpec, N: float, f=None, mu: float = 0.0, a_s: float = 0.0):
        """
        Single-mode squeezed vacuum with sinh^2(xi0) = N in the l = 0 mode f.

        G^0 = N f f^T and F^0 = sqrt(N(N+1)) f f^T.
        """
        f = _unit_mode(spec, f)
        state = cls.vacuum(spec, mu, a_s)
        G = list(state.G)
        F = list(state.F)
        G[0] = N * np.outer(f, f.conj())
        F[0] = math.sqrt(N * (N + 1.0)) * np.outer(f, f)
        return replace(state, G=tuple(G), F=tuple(F))

    def with_mu(self, mu: float):
        return replace(self, mu=float(mu))

    def with_a_s(self, a_s: float):
        return replace(self, a_s=float(a_s))

    # ---------------------------------------------------------------- structure

    def covariance(self, l: int) -> np.ndarray:
        """Nambu covariance block Gamma^l = [[I+2G, 2F], [2F*, I+2G*]]."""
        G, F = self.G[l], self.F[l]
        eye = np.eye(self.spec.nb)
        return np.block([[eye + 2 * G, 2 * F], [2 * F.conj(), eye + 2 * G.conj()]])

    def is_physical(self, tol: float = PHYSICALITY_TOL) -> bool:
        """Every |eig(sigma_z Gamma^l)| >= 1 - tol and the symmetries of G and F hold."""
        nb = self.spec.nb
        sigma_z = np.diag(np.r_[np.ones(nb), -np.ones(nb)])
        for l in range(self.spec.l_max + 1):
            if not np.allclose(self.G[l], self.G[l].conj().T, atol=1e-10):
                return False
            if not np.allclose(self.F[l], self.F[l].T, atol=1e-10):
                return False
            if np.any(np.abs(eigvals(sigma_z @ self.covariance(l))) < 1.0 - tol):
                return False
        return True

    def is_real(self, tol: float = 1e-10) -> bool:
        arrays = (self.beta,) + self.G + self.F
        return all(np.max(np.abs(a.imag), initial=0.0) <= tol for a in arrays)

    # ---------------------------------------------------------------- snapshot

    def to_json(self) -> str:
        def pairs(array):
            flat = np.asarray(array).ravel()
            return [[float(z.real), float(z.imag)] for z in flat]

        payload = {
            "n_cut": self.spec.n_cut,
            "l_max": self.spec.l_max,
            "mu": float(self.mu),
            "a_s": float(self.a_s),
            "beta": pairs(self.beta),
            "G": [pairs(g) for g in self.G],
            "F": [pairs(f) for f in self.F],
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str):
        payload = json.loads(text)
        spec = BasisSpec(payload["n_cut"], payload["l_max"])
        nb = spec.nb

        def unpack(pairs, shape):
            values = np.array([complex(re, im) for re, im in pairs], dtype=complex)
            return values.reshape(shape)

        return cls(
            spec,
            unpack(payload["beta"], (nb,)),
            tuple(unpack(g, (nb, nb)) for g in payload["G"]),
            tuple(unpack(f, (nb, nb)) for f in payload["F"]),
            payload["mu"],
            payload["a_s"],
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def _unit_mode(spec: BasisSpec, f):
    if f is None:
        f = np.zeros(spec.nb)
        f[0] = 1.0
    f = np.asarray(f, dtype=complex)
    if f.shape != (spec.nb,):
        raise DomainError(f"mode has shape {f.shape}, expected ({spec.nb},)")
    norm = np.linalg.norm(f)
    if norm == 0.0:
        raise DomainError("mode vector is zero")
    return f / norm


@dataclass(frozen=True, eq=False)
class MeanFieldBlocks:
    """
    Mean-field Hamiltonian blocks, driving vector and variational energy of a state.

    E_blocks[l] is Hermitian, Delta_blocks[l] symmetric; eta = dE/d beta^*.
    E_drive and Delta_drive are the l = 0 blocks without the double-counted coherent
    pieces, so that eta = E_drive beta + Delta_drive beta^*.
    """

    E_blocks: tuple
    Delta_blocks: tuple
    eta: np.ndarray
    energy: float
    mu: float = 0.0
    spec: BasisSpec = field(default=None)
    E_drive: np.ndarray = None
    Delta_drive: np.ndarray = None

    def hamiltonian(self, l: int) -> np.ndarray:
        """Nambu block [[E, Delta], [Delta*, E*]]."""
        E, D = self.E_blocks[l], self.Delta_blocks[l]
        return np.block([[E, D], [D.conj(), E.conj()]])

    def drive(self, mu: float = 0.0) -> np.ndarray:
        """Nambu operator K with [eta; eta*] = (K - mu) [beta; beta*]."""
        E = self.E_drive - mu * np.eye(self.E_drive.shape[0])
        D = self.Delta_drive
        return np.block([[E, D], [D.conj(), E.conj()]])


# --------------------------------------------------------------------------------------
# Contractions
# --------------------------------------------------------------------------------------


def _check_tensors(state: GaussianState, tensors: InteractionTensor):
    if tensors.spec != state.spec:
        raise DomainError(
            f"tensor basis (n_cut={tensors.spec.n_cut}, l_max={tensors.spec.l_max}) does not match "
            f"state basis (n_cut={state.spec.n_cut}, l_max={state.spec.l_max})"
        )


def _contract(block: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """sum_{cd} M[a, b, c, d] B[c, d]."""
    nb = block.shape[0]
    return (block.reshape(nb * nb, nb * nb) @ matrix.reshape(nb * nb)).reshape(nb, nb)


def _field_sums(state: GaussianState, tensors: InteractionTensor):
    """
    Per-l contractions against the normal and anomalous sources.

    normal[l] = sum_l1 (2l1+1) M^{l,l1} : (delta_{l1,0} beta* beta^T + G^{l1})
    anomalous[l] = sum_l1 (2l1+1) M^{l,l1} : (delta_{l1,0} beta beta^T + F^{l1})

    Also returns the purely coherent pieces M^{0,0} : beta* beta^T and M^{0,0} : beta beta^T,
    which the energy and eta must not double count.
    """
    spec = state.spec
    beta = state.beta
    coherent_n = np.outer(beta.conj(), beta)
    coherent_p = np.outer(beta, beta)
    normal, anomalous = [], []
    for l in range(spec.l_max + 1):
        acc_n = np.zeros((spec.nb, spec.nb), dtype=complex)
        acc_p = np.zeros((spec.nb, spec.nb), dtype=complex)
        for l1 in range(spec.l_max + 1):
            block = tensors.block(l, l1)
            weight = 2 * l1 + 1
            source_n = state.G[l1] + (coherent_n if l1 == 0 else 0.0)
            source_p = state.F[l1] + (coherent_p if l1 == 0 else 0.0)
            acc_n += weight * _contract(block, source_n)
            acc_p += weight * _contract(block, source_p)
        normal.append(state.a_s * acc_n)
        anomalous.append(state.a_s * acc_p)
    block00 = tensors.block(0, 0)
    cond_n = state.a_s * _contract(block00, coherent_n)
    cond_p = state.a_s * _contract(block00, coherent_p)
    return normal, anomalous, cond_n, cond_p


def build_mean_field(state: GaussianState, tensors: InteractionTensor) -> MeanFieldBlocks:
    """
    Mean-field blocks, driving vector and energy of a state.

    E^l = eps_l + 2 sum_l1 (2l1+1) M^{l,l1} : (delta_{l1,0} beta* beta + G^{l1})
    Delta^l = sum_l1 (2l1+1) M^{l,l1} : (delta_{l1,0} beta beta + F^{l1})
    eta = (eps_0 + M^{0,0}:beta* beta + 2 sum (2l1+1) M^{0,l1}:G^{l1}) beta + (sum (2l1+1) M^{0,l1}:F^{l1}) beta*

    Parameters
    ----------
    state : GaussianState
    tensors : InteractionTensor
        Must be built on the state's BasisSpec; entries are scaled by state.a_s.

    Returns
    -------
    MeanFieldBlocks

    Raises
    ------
    DomainError
        If the tensors and the state use different bases.
    """
    _check_tensors(state, tensors)
    spec = state.spec
    sums = _field_sums(state, tensors)
    normal, anomalous, cond_n, cond_p = sums

    E_blocks, Delta_blocks = [], []
    for l in range(spec.l_max + 1):
        eps = np.diag(level_energies(spec, l, state.mu)).astype(complex)
        E = eps + 2.0 * normal[l]
        D = anomalous[l]
        E_blocks.append(0.5 * (E + E.conj().T))
        Delta_blocks.append(0.5 * (D + D.T))

    beta = state.beta
    eps0 = level_energies(spec, 0, state.mu)
    E_drive = np.diag(eps0).astype(complex) + 2.0 * normal[0] - cond_n
    Delta_drive = anomalous[0] - cond_p
    E_drive = 0.5 * (E_drive + E_drive.conj().T)
    Delta_drive = 0.5 * (Delta_drive + Delta_drive.T)
    eta = E_drive @ beta + Delta_drive @ beta.conj()

    energy = _energy_from_sums(state, sums)
    return MeanFieldBlocks(tuple(E_blocks), tuple(Delta_blocks), eta, energy, state.mu, spec, E_drive, Delta_drive)


def _energy_from_sums(state, sums) -> float:
    spec = state.spec
    normal, anomalous, cond_n, cond_p = sums
    beta = state.beta
    coherent_n = np.outer(beta.conj(), beta)
    coherent_p = np.outer(beta, beta)

    energy = float(np.sum(level_energies(spec, 0, state.mu) * np.abs(beta) ** 2))
    for l in range(spec.l_max + 1):
        energy += (2 * l + 1) * float(np.real(np.sum(level_energies(spec, l, state.mu) * np.diag(state.G[l]))))

    # G rows give I(G,G) + I(G,Nc); F* rows give 1/2 I(F*,F) + 1/2 I(F*,Pc)
    interaction = 0.0
    for l in range(spec.l_max + 1):
        weight = 2 * l + 1
        interaction += weight * np.sum(state.G[l] * normal[l])
        interaction += 0.5 * weight * np.sum(state.F[l].conj() * anomalous[l])
    # coherent rows: I(Nc,G) + 1/2 I(Nc,Nc) and 1/2 I(Pc*,F)
    interaction += np.sum(coherent_n * (normal[0] - 0.5 * cond_n))
    interaction += 0.5 * np.sum(coherent_p.conj() * (anomalous[0] - cond_p))
    return energy + float(np.real(interaction))


def total_energy(state: GaussianState, tensors: InteractionTensor) -> float:
    """
    Variational energy of the Gaussian state.

    E = sum eps |beta|^2 + sum_l (2l+1) Tr(eps_l G^l) + 1/2 I(Nc,Nc) + 2 I(Nc,G) + I(G,G)
        + Re I(Pc,F*) + 1/2 I(F,F*)

    with I(A,B) = sum_{l,l1} (2l+1)(2l1+1) M^{l,l1} : A^l : B^{l1}, Nc = beta* beta^T
    and Pc = beta beta^T.
    """
    _check_tensors(state, tensors)
    return _energy_from_sums(state, _field_sums(state, tensors))



# --------------------------------------------------------------------------------------
# Observables
# --------------------------------------------------------------------------------------


def particle_numbers(state: GaussianState):
    """(N_c, N_d) = (sum |beta|^2, sum_l (2l+1) Tr G^l)."""
    n_c = float(np.sum(np.abs(state.beta) ** 2))
    n_d = float(sum((2 * l + 1) * np.real(np.trace(g)) for l, g in enumerate(state.G)))
    return n_c, n_d


def total_number(state: GaussianState) -> float:
    n_c, n_d = particle_numbers(state)
    return n_c + n_d


def number_variance(state: GaussianState) -> float:
    """
    Exact Wick variance of the particle number.

    Var N = sum_l (2l+1) [Tr(G + G^2) + ||F||^2] + beta^dag (I + 2 G^0) beta + 2 Re(beta^T F^0* beta)
    """
    variance = 0.0
    for l, (G, F) in enumerate(zip(state.G, state.F)):
        variance += (2 * l + 1) * float(np.real(np.trace(G + G @ G)) + np.sum(np.abs(F) ** 2))
    beta = state.beta
    eye = np.eye(state.spec.nb)
    variance += float(np.real(beta.conj() @ (eye + 2 * state.G[0]) @ beta))
    variance += 2.0 * float(np.real(beta @ state.F[0].conj() @ beta))
    return variance


def second_moment(state: GaussianState) -> float:
    """Integral of r^2 n(r) over the total density."""
    spec = state.spec
    moment = float(np.real(state.beta.conj() @ radial_moment_matrix(spec, 0) @ state.beta))
    for l, G in enumerate(state.G):
        moment += (2 * l + 1) * float(np.real(np.trace(radial_moment_matrix(spec, l) @ G)))
    return moment


def width(state: GaussianState, per_particle: bool = True) -> float:
    """
    RMS radius of the total (coherent + depleted) density.

    Parameters
    ----------
    state : GaussianState
    per_particle : bool
        Divide <r^2> by N before the square root (default). False gives the
        unnormalized [int r^2 n(r) dr]^{1/2}.

    Raises
    ------
    DomainError
        For an empty state with per_particle=True.
    """
    moment = second_moment(state)
    if not per_particle:
        return math.sqrt(max(moment, 0.0))
    N = total_number(state)
    if N <= 0.0:
        raise DomainError("width of an empty state is undefined")
    return math.sqrt(moment / N)


def local_fields(state: GaussianState, r):
    """
    phi(r), G(r,r) and F(r,r) on the radii r (s-wave angular average folded in).
    """
    spec = state.spec
    r = np.atleast_1d(np.asarray(r, dtype=float))
    radial0 = radial_grid_values(spec, 0, r)
    phi = (state.beta @ radial0) / math.sqrt(4.0 * math.pi)
    g_local = np.zeros(r.shape, dtype=complex)
    f_local = np.zeros(r.shape, dtype=complex)
    for l in range(spec.l_max + 1):
        radial = radial0 if l == 0 else radial_grid_values(spec, l, r)
        weight = (2 * l + 1) / (4.0 * math.pi)
        g_local += weight * np.einsum("ar,ab,br->r", radial, state.G[l], radial)
        f_local += weight * np.einsum("ar,ab,br->r", radial, state.F[l], radial)
    return phi, g_local.real, f_local


def density_profile(state: GaussianState, r):
    """Coherent |phi(r)|^2 and depleted G(r,r) local densities."""
    phi, g_local, _ = local_fields(state, r)
    return np.abs(phi) ** 2, g_local


def g2_local(state: GaussianState, r):
    """
    Local second-order coherence g2(r) from Wick's theorem.

    g2 = (|phi|^4 + 4|phi|^2 G + 2 Re(phi*^2 F) + 2 G^2 + |F|^2) / (|phi|^2 + G)^2

    Raises
    ------
    DomainError
        Where the density vanishes (for instance the vacuum).
    """
    scalar = np.ndim(r) == 0
    phi, g_local, f_local = local_fields(state, r)
    n_c = np.abs(phi) ** 2
    density = n_c + g_local
    if np.any(density <= MIN_DENSITY):
        raise DomainError("g2 is undefined at zero density")
    numerator = (
        n_c ** 2
        + 4.0 * n_c * g_local
        + 2.0 * np.real(phi.conj() ** 2 * f_local)
        + 2.0 * g_local ** 2
        + np.abs(f_local) ** 2
    )
    g2 = numerator / density ** 2
    return float(g2[0]) if scalar else g2


def extract_squeezed_mode(state: GaussianState):
    """
    Leading natural orbital of the l = 0 depleted cloud.

    Returns
    -------
    f : np.ndarray
        Real unit vector over n (phase fixed so the largest component is positive).
    xi0 : float
        asinh(sqrt(N_d)) with N_d the full depleted population, the squeezing
        parameter of a single-mode state holding every non-condensed particle.
    residual : float
        ||G^0 - lambda f f^dag||_F / ||G^0||_F with lambda the leading eigenvalue of G^0.

    Raises
    ------
    NoSqueezedModeError
        If the depleted population is below MIN_DEPLETION.
    """
    _, n_d = particle_numbers(state)
    if n_d < MIN_DEPLETION:
        raise NoSqueezedModeError(f"depleted population {n_d:.3g} too small for a squeezed mode")
    G0 = 0.5 * (state.G[0] + state.G[0].conj().T)
    values, vectors = eigh(G0)
    population = float(values[-1])
    f = vectors[:, -1]
    pivot = np.argmax(np.abs(f))
    f = f * np.exp(-1j * np.angle(f[pivot]))
    residual = float(np.linalg.norm(G0 - population * np.outer(f, f.conj())) / np.linalg.norm(G0))
    xi0 = math.asinh(math.sqrt(max(n_d, 0.0)))
    if np.max(np.abs(f.imag)) > 1e-8:
        logger.warning("squeezed mode has imaginary part %.3g, returning real part", np.max(np.abs(f.imag)))
    return f.real / np.linalg.norm(f.real), xi0, residual


def tail_population(state: GaussianState, fraction: float = 0.75) -> float:
    """Share of the particles in radial levels n >= fraction * n_cut, over all l."""
    start = int(math.ceil(fraction * state.spec.n_cut))
    tail = float(np.sum(np.abs(state.beta[start:]) ** 2))
    for l, G in enumerate(state.G):
        tail += (2 * l + 1) * float(np.sum(np.real(np.diag(G))[start:]))
    total = total_number(state)
    return tail / total if total > 0 else 0.0
