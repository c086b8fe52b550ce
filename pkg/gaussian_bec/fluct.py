"""
fluct.py

Linear response of the Gaussian ground state per total angular momentum L.

The sector couples one-particle amplitudes delta beta_{nL0} (1PE) to pair amplitudes of
two Bogoliubov excitations (2PE) in the channels (l <= l') with |l - l'| <= L <= l + l' and
l + l' + L even. In canonical coordinates X = (delta beta, pairs) the equations read

    i d/dt (X, X*) = [[A, B], [-B*, -A*]] (X, X*)

with A Hermitian and B symmetric; eigenvalues come in (omega, -omega*) pairs.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eig

from .basis import CoupledTensor, InteractionTensor, coupling_weight, radial_grid_values
from .errors import AssemblyError, DomainError
from .ground import BogoliubovBasis
from .gstate import GaussianState, build_mean_field

logger = logging.getLogger(__name__)


GOLDSTONE_TOL = 1e-3
NORM_TOL = 1e-8
GROWTH_TOL = 1e-6
REALITY_TOL = 1e-10
SPECTRUM_COLUMNS = ["a_s_over_aho_times_N", "L", "omega", "weight_1pe", "degeneracy", "label"]


@dataclass(frozen=True)
class PairChannel:
    l: int
    l_p: int
    offset: int
    size: int

    @property
    def symmetric(self) -> bool:
        return self.l == self.l_p

    @property
    def kappa(self) -> int:
        return 1 if self.symmetric else 2


@dataclass(frozen=True, eq=False)
class SectorOperator:
    """
    Linear-response matrix of one L sector.

    The stacked vector is (delta beta, pairs, delta beta*, pairs*). `n_1pe` is zero when the
    ground state has no coherent part. Symmetric channels (l = l') use orthonormal
    coordinates over s <= s'.
    """

    L: int
    matrix: np.ndarray
    n_1pe: int
    channels: tuple
    s_cut: int
    operators: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0] // 2

    @property
    def metric(self) -> np.ndarray:
        return np.r_[np.ones(self.dim), -np.ones(self.dim)]


@dataclass(frozen=True, eq=False)
class ModeRecord:
    """One collective mode of a sector, counted 2L+1 times."""

    L: int
    omega: float
    weight_1pe: float
    weight_2pe: float
    degeneracy: int
    label: str = "other"
    growth_rate: float = 0.0
    generator_overlap: float = math.nan
    vector: np.ndarray = field(default=None, repr=False)

    def as_row(self, coupling: float) -> dict:
        return {
            "a_s_over_aho_times_N": coupling,
            "L": self.L,
            "omega": self.omega,
            "weight_1pe": self.weight_1pe,
            "degeneracy": self.degeneracy,
            "label": self.label,
        }


# --------------------------------------------------------------------------------------
# Assembly
# --------------------------------------------------------------------------------------


def pair_channels(L: int, l_max: int):
    """Canonical channels (l <= l') coupled to total L with even parity."""
    return [
        (l, l_p)
        for l in range(l_max + 1)
        for l_p in range(l, l_max + 1)
        if (l + l_p + L) % 2 == 0 and abs(l - l_p) <= L <= l + l_p
    ]


def _symmetric_embedding(ns: int) -> np.ndarray:
    """vec(zeta) = T w for symmetric zeta with ||w|| the canonical norm (sqrt 2 on s = s')."""
    rows, cols = np.triu_indices(ns)
    T = np.zeros((ns * ns, rows.size))
    for k, (s, t) in enumerate(zip(rows, cols)):
        if s == t:
            T[s * ns + s, k] = math.sqrt(2.0)
        else:
            T[s * ns + t, k] = 1.0
            T[t * ns + s, k] = 1.0
    return T


def _real(matrix, what):
    matrix = np.asarray(matrix)
    if np.iscomplexobj(matrix):
        if np.max(np.abs(matrix.imag), initial=0.0) > REALITY_TOL:
            raise DomainError(f"{what} must be real for sector assembly")
        return matrix.real
    return matrix


def _channel_operators(channel, bogo: BogoliubovBasis, s_cut: int):
    l, l_p = channel
    ns = s_cut + 1
    u, v = _real(bogo.u_blocks[l], "u")[:, :ns], _real(bogo.v_blocks[l], "v")[:, :ns]
    u_p, v_p = _real(bogo.u_blocks[l_p], "u")[:, :ns], _real(bogo.v_blocks[l_p], "v")[:, :ns]
    D, D_p = np.asarray(bogo.D[l])[:ns], np.asarray(bogo.D[l_p])[:ns]

    T = _symmetric_embedding(ns) if l == l_p else np.eye(ns * ns)
    diagonal = np.add.outer(D, D_p).ravel() * (0.5 if l == l_p else 1.0)
    return {
        "Sg": (np.kron(u, v_p) + np.kron(v, u_p)) @ T,
        "Kuu": np.kron(u, u_p) @ T,
        "Kvv": np.kron(v, v_p) @ T,
        "D": T.T @ (diagonal[:, None] * T),
        "T": T,
    }


def assemble_sector(L: int, ground: GaussianState, bogo: BogoliubovBasis, coupled: CoupledTensor,
                    s_cut: int = None) -> SectorOperator:
    """
    Linearized equations of motion of the L sector.

    Parameters
    ----------
    L : int
        Total angular momentum, 0 <= L <= l_max.
    ground : GaussianState
        Converged real ground state (carries a_s and mu).
    bogo : BogoliubovBasis
        Bogoliubov basis of the ground state's mean-field Hamiltonian.
    coupled : CoupledTensor
        CG-weighted tensor for this L.
    s_cut : int, optional
        Largest Bogoliubov index kept in pair channels (default n_cut).

    Returns
    -------
    SectorOperator

    Raises
    ------
    AssemblyError
        If L is outside the basis, the coupled tensor belongs to another L, or
        no CG-allowed channel exists.
    DomainError
        For complex ground states or Bogoliubov blocks.
    """
    spec = ground.spec
    if coupled.L != L:
        raise AssemblyError(f"coupled tensor is for L={coupled.L}, not L={L}")
    if not 0 <= L <= spec.l_max:
        raise AssemblyError(f"L={L} outside the basis (l_max={spec.l_max})")
    if len(bogo.u_blocks) != spec.l_max + 1:
        raise AssemblyError("Bogoliubov basis does not cover every angular momentum")
    if not ground.is_real():
        raise DomainError("sector assembly requires a real ground state")
    s_cut = spec.n_cut if s_cut is None else min(s_cut, spec.n_cut)

    nb = spec.nb
    a_s = ground.a_s
    beta = ground.beta.real
    has_coherent = bool(np.linalg.norm(beta) > 1e-12)
    n_1pe = nb if has_coherent else 0

    keys = pair_channels(L, spec.l_max)
    if not keys and not has_coherent:
        raise AssemblyError(f"no CG-allowed pair channel for L={L}")
    ops = {key: _channel_operators(key, bogo, s_cut) for key in keys}

    channels = []
    offset = n_1pe
    for key in keys:
        size = ops[key]["T"].shape[1]
        channels.append(PairChannel(key[0], key[1], offset, size))
        offset += size
    dim = offset

    A = np.zeros((dim, dim))
    B = np.zeros((dim, dim))

    if has_coherent:
        mean_field = build_mean_field(ground, coupled.tensors)
        A[:nb, :nb] = _real(mean_field.E_blocks[L], "E block")
        B[:nb, :nb] = _real(mean_field.Delta_blocks[L], "Delta block")

    for c in channels:
        op = ops[(c.l, c.l_p)]
        rows = slice(c.offset, c.offset + c.size)
        if has_coherent:
            mixed = coupled.block((L, 0), (c.l, c.l_p), a_s).reshape(nb, nb, nb * nb)
            m = np.einsum("abp,b->ap", mixed, beta)
            A[:nb, rows] = c.kappa * m @ (op["Sg"] + op["Kuu"])
            B[:nb, rows] = c.kappa * m @ (op["Sg"] + op["Kvv"])
            A[rows, :nb] = A[:nb, rows].T
            B[rows, :nb] = B[:nb, rows].T
        A[rows, rows] += op["D"]
        for c1 in channels:
            op1 = ops[(c1.l, c1.l_p)]
            cols = slice(c1.offset, c1.offset + c1.size)
            M = coupled.matrix((c.l, c.l_p), (c1.l, c1.l_p), a_s)
            factor = 0.5 * c.kappa * c1.kappa
            sg = op["Sg"].T @ M @ op1["Sg"]
            A[rows, cols] += factor * (sg + op["Kuu"].T @ M @ op1["Kuu"] + op["Kvv"].T @ M @ op1["Kvv"])
            B[rows, cols] += factor * (sg + op["Kuu"].T @ M @ op1["Kvv"] + op["Kvv"].T @ M @ op1["Kuu"])

    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    matrix = np.block([[A, B], [-B, -A]])
    logger.debug("sector: %d | dim: %d | channels: %s | 1pe: %d", L, dim, keys, n_1pe)
    return SectorOperator(L, matrix, n_1pe, tuple(channels), s_cut, ops)


# --------------------------------------------------------------------------------------
# Diagonalization
# --------------------------------------------------------------------------------------


def _generator(op: SectorOperator, ground: GaussianState):
    if op.L != 0 or op.n_1pe == 0 or ground is None:
        return None
    g = np.zeros(2 * op.dim, dtype=complex)
    g[: op.n_1pe] = 1j * ground.beta
    g[op.dim: op.dim + op.n_1pe] = -1j * ground.beta.conj()
    return g / np.linalg.norm(g)


def classify_mode(mode: ModeRecord, op: SectorOperator, lowest_nonzero: bool = False,
                  ground: GaussianState = None) -> ModeRecord:
    """
    Weights, label and Goldstone overlap of a mode.

    weight_1pe is the Euclidean share of the delta beta components. The label is
    goldstone for |omega| < 1e-3, dipole / breathing for the lowest other mode of
    L = 1 / L = 0, and other otherwise.
    """
    vector = mode.vector
    dim = op.dim
    total = float(np.sum(np.abs(vector) ** 2))
    one = float(np.sum(np.abs(vector[: op.n_1pe]) ** 2) + np.sum(np.abs(vector[dim: dim + op.n_1pe]) ** 2))
    weight_1pe = one / total if total > 0 else 0.0

    if abs(mode.omega) < GOLDSTONE_TOL:
        label = "goldstone"
    elif lowest_nonzero and op.L == 1:
        label = "dipole"
    elif lowest_nonzero and op.L == 0:
        label = "breathing"
    else:
        label = "other"

    overlap = mode.generator_overlap
    generator = _generator(op, ground)
    if generator is not None and label == "goldstone":
        overlap = float(abs(np.vdot(generator, vector)) / math.sqrt(total))
    return replace(mode, weight_1pe=weight_1pe, weight_2pe=1.0 - weight_1pe, label=label,
                   generator_overlap=overlap)


def diagonalize_sector(op: SectorOperator, ground: GaussianState = None):
    """
    Physical branch of the sector spectrum.

    One eigenpair is kept per (omega, -omega*) pair: positive symplectic norm
    |X|^2 - |Y|^2 first, then the largest Re(omega) among indeterminate-norm vectors.
    Complex omega (|Im| > 1e-6) is reported as growth_rate and logged.

    Returns
    -------
    list of ModeRecord
        Sorted by omega.
    """
    omega, vectors = eig(op.matrix)
    dim = op.dim
    norms = np.sum(np.abs(vectors[:dim]) ** 2, axis=0) - np.sum(np.abs(vectors[dim:]) ** 2, axis=0)
    sizes = np.sum(np.abs(vectors) ** 2, axis=0)

    positive = [j for j in range(2 * dim) if norms[j] > NORM_TOL * sizes[j]]
    if len(positive) < dim:
        undecided = [j for j in range(2 * dim) if abs(norms[j]) <= NORM_TOL * sizes[j]]
        undecided.sort(key=lambda j: -omega[j].real)
        positive += undecided[: dim - len(positive)]
    positive.sort(key=lambda j: omega[j].real)

    raw = []
    for j in positive[:dim]:
        growth = float(omega[j].imag)
        if abs(growth) > GROWTH_TOL:
            logger.warning("sector: %d | dynamical instability | omega: %s", op.L, omega[j])
        raw.append(ModeRecord(op.L, float(omega[j].real), 0.0, 0.0, 2 * op.L + 1,
                              growth_rate=growth, vector=vectors[:, j]))

    lowest = next((k for k, m in enumerate(raw) if abs(m.omega) >= GOLDSTONE_TOL), None)
    return [classify_mode(m, op, k == lowest, ground) for k, m in enumerate(raw)]


def spectrum(L_values, ground: GaussianState, bogo: BogoliubovBasis, tensors: InteractionTensor,
             s_cut: int = None, jobs: int = 1):
    """Assemble and diagonalize several sectors concurrently; records come back ordered by L, then omega."""

    def run(L):
        op = assemble_sector(L, ground, bogo, CoupledTensor(L, tensors), s_cut)
        return diagonalize_sector(op, ground)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        sectors = list(pool.map(run, list(L_values)))
    return [mode for modes in sectors for mode in modes]


# --------------------------------------------------------------------------------------
# Density fluctuation
# --------------------------------------------------------------------------------------


def density_fluctuation(mode: ModeRecord, op: SectorOperator, ground: GaussianState, r) -> np.ndarray:
    """
    Radial profile of delta n = phi* delta phi + phi delta phi* + delta G(r, r) (Y_L0 stripped).

    Parameters
    ----------
    mode : ModeRecord
        Mode with its eigenvector.
    op : SectorOperator
        Sector the mode belongs to.
    ground : GaussianState
    r : np.ndarray
        Radii (a_ho).
    """
    spec = ground.spec
    r = np.atleast_1d(np.asarray(r, dtype=float))
    dim = op.dim
    X, Y = mode.vector[:dim], mode.vector[dim:]
    summed = X + Y
    profile = np.zeros(r.shape, dtype=complex)

    if op.n_1pe:
        phi = (ground.beta.real @ radial_grid_values(spec, 0, r)) / math.sqrt(4.0 * math.pi)
        profile += phi * (summed[: op.n_1pe] @ radial_grid_values(spec, op.L, r))

    for c in op.channels:
        ops = op.operators[(c.l, c.l_p)]
        pair = 0.5 * c.kappa * ops["Sg"] @ summed[c.offset: c.offset + c.size]
        radial = radial_grid_values(spec, c.l, r)
        radial_p = radial if c.l == c.l_p else radial_grid_values(spec, c.l_p, r)
        amplitude = coupling_weight(op.L, c.l, c.l_p) / math.sqrt(4.0 * math.pi)
        matrix = pair.reshape(spec.nb, spec.nb)
        profile += amplitude * np.einsum("ar,ab,br->r", radial, matrix, radial_p)

    # fix the overall phase so the profile is real
    pivot = np.argmax(np.abs(profile))
    if abs(profile[pivot]) > 0:
        profile = profile * np.exp(-1j * np.angle(profile[pivot]))
    return profile.real
