"""
gpe.py

Single-mode effective equations in the l = 0 oscillator basis:
- the coherent-state GPE (u_mult = 1),
- the squeezed-mode equation with tripled interaction (u_mult = 3, optionally 3(1 + 1/(3N))),
- the GPE with the beyond-mean-field (LHY) term,
plus the homogeneous Bogoliubov integrals behind the LHY coefficient and a scan driver.

The mode is f = sum_n c_n R_n0 Y_00 with sum c_n^2 = 1. With g = u_mult N a_s,
    E/N = sum eps_n c_n^2 + g/2 sum M c c c c,     mu = sum eps_n c_n^2 + g sum M c c c c,
where M is the l = 0 interaction tensor at a_s = 1.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pandas as pd
from scipy.integrate import quad
from scipy.linalg import solve
from scipy.special import roots_genlaguerre

from .basis import BasisSpec, four_radial_integrals, level_energies, radial_grid_values, radial_moment_matrix
from .errors import CollapseError, DivergenceError, DomainError

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------------------
# Global configuration constants
# --------------------------------------------------------------------------------------

DEFAULT_DTAU = 0.05
DEFAULT_TOL = 1e-10
DEFAULT_MAX_STEPS = 20000
DEFAULT_COLLAPSE_WIDTH = 0.3
TAIL_FRACTION = 0.75
TAIL_WEIGHT_LIMIT = 1e-4

THRESHOLD_RESOLUTION = 1e-3
THRESHOLD_G_MAX = 2.0

LHY_COEFFICIENT = 40.0 / 3.0
SCAN_COLUMNS = ["N", "a_s_over_aho", "u_mult", "converged", "E_per_N", "mu", "W"]


@dataclass(frozen=True, eq=False)
class RadialMode:
    """
    Normalized l = 0 mode carrying norm_N particles.

    Parameters
    ----------
    coeffs : np.ndarray
        Real coefficients over R_n0 with sum c^2 = 1.
    norm_N : float
        Particles in the mode.
    u_eff : float
        Interaction multiplier the mode was relaxed with.
    spec : BasisSpec
    mu, energy_per_N : float
        Chemical potential and energy per particle at convergence.
    converged : bool
    """

    coeffs: np.ndarray
    norm_N: float
    u_eff: float
    spec: BasisSpec
    mu: float = math.nan
    energy_per_N: float = math.nan
    converged: bool = True

    @property
    def width(self) -> float:
        """Per-particle rms radius."""
        return math.sqrt(float(self.coeffs @ radial_moment_matrix(self.spec, 0) @ self.coeffs))

    def profile(self, r) -> np.ndarray:
        """phi(r) = sqrt(N) sum_n c_n R_n0(r) Y_00."""
        return math.sqrt(self.norm_N / (4.0 * math.pi)) * (self.coeffs @ radial_grid_values(self.spec, 0, r))

    def tail_weight(self) -> float:
        return tail_weight(self.coeffs)


def tail_weight(coeffs) -> float:
    """Population fraction in the top quarter of the radial basis."""
    coeffs = np.asarray(coeffs)
    start = int(math.ceil(TAIL_FRACTION * (coeffs.size - 1)))
    return float(np.sum(np.abs(coeffs[start:]) ** 2) / max(np.sum(np.abs(coeffs) ** 2), 1e-300))


@lru_cache(maxsize=8)
def s_wave_tensor(spec: BasisSpec) -> np.ndarray:
    """M^{0,0}[n,n',n1,n1'] at a_s = 1."""
    tensor = four_radial_integrals(spec.n_cut, (0, 0, 0, 0), spec.quadrature_order)
    tensor.flags.writeable = False
    return tensor


def effective_multiplier(u_mult: float, N: float, exact_u_eff: bool = False) -> float:
    if u_mult not in (1, 3):
        raise DomainError(f"u_mult must be 1 or 3, got {u_mult}")
    if exact_u_eff and u_mult == 3:
        return 3.0 * (1.0 + 1.0 / (3.0 * N))
    return float(u_mult)


# --------------------------------------------------------------------------------------
# Relaxation
# --------------------------------------------------------------------------------------


def _nonlinear(tensor, coeffs):
    nb = coeffs.size
    return (tensor.reshape(nb * nb, nb * nb) @ np.outer(coeffs, coeffs).ravel()).reshape(nb, nb)


def effective_energy(coeffs, g: float, spec: BasisSpec) -> float:
    """E/N = sum eps c^2 + g/2 sum M c c c c for the coefficients as given (no renormalization)."""
    coeffs = np.asarray(coeffs, dtype=float)
    eps = level_energies(spec, 0)
    quartic = float(coeffs @ _nonlinear(s_wave_tensor(spec), coeffs) @ coeffs)
    return float(eps @ coeffs ** 2) + 0.5 * g * quartic


class _LhyTerm:
    """Quadrature for the |phi|^3 potential on a Gauss-Laguerre grid in x = r^2."""

    def __init__(self, spec: BasisSpec, N: float, a_s: float):
        order = 2 * spec.nb + 40
        x, w = roots_genlaguerre(order, 0.5)
        self.radial = radial_grid_values(spec, 0, np.sqrt(x))
        # int r^2 f dr = 1/2 sum w e^x f(sqrt x)
        self.weights = 0.5 * w * np.exp(x)
        strength = LHY_COEFFICIENT * 4.0 * math.pi * a_s * a_s * math.sqrt(a_s / math.pi)
        self.prefactor = strength * (N / (4.0 * math.pi)) ** 1.5

    def matrix(self, coeffs):
        amplitude = np.abs(coeffs @ self.radial) ** 3
        return np.einsum("q,aq,bq->ab", self.weights * amplitude, self.radial, self.radial) * self.prefactor

    def energy_per_N(self, coeffs) -> float:
        amplitude = np.abs(coeffs @ self.radial) ** 5
        return 0.4 * self.prefactor * float(self.weights @ amplitude)


def _relax_mode(spec: BasisSpec, g: float, lhy: _LhyTerm = None, dtau=DEFAULT_DTAU, tol=DEFAULT_TOL,
                max_steps=DEFAULT_MAX_STEPS, collapse_width=DEFAULT_COLLAPSE_WIDTH, coeffs=None):
    """
    Normalized semi-implicit imaginary-time relaxation c <- (I + dtau H[c])^{-1} c.

    Returns
    -------
    (coeffs, mu, energy_per_N, converged)

    Raises
    ------
    CollapseError
        Non-finite iterate, width below collapse_width or tail weight above TAIL_WEIGHT_LIMIT.
    """
    nb = spec.nb
    tensor = s_wave_tensor(spec)
    eps = np.diag(level_energies(spec, 0))
    moments = radial_moment_matrix(spec, 0)
    if coeffs is None:
        coeffs = np.zeros(nb)
        coeffs[0] = 1.0
    coeffs = np.asarray(coeffs, dtype=float) / np.linalg.norm(coeffs)
    eye = np.eye(nb)
    converged = False
    mu = math.nan

    for step in range(1, max_steps + 1):
        H = eps + g * _nonlinear(tensor, coeffs)
        if lhy is not None:
            H = H + lhy.matrix(coeffs)
        mu = float(coeffs @ H @ coeffs)
        residual = float(np.linalg.norm(H @ coeffs - mu * coeffs))
        if residual < tol:
            converged = True
            break
        # shift keeps I + dtau (H - shift) positive definite for attractive couplings
        shift = min(0.0, float(np.linalg.eigvalsh(H)[0]) - 1.0)
        updated = solve(eye + dtau * (H - shift * eye), coeffs, assume_a="sym")
        norm = np.linalg.norm(updated)
        if not np.isfinite(norm) or norm == 0.0:
            raise CollapseError(f"non-finite mode at step {step}", step=step, state=coeffs)
        updated = updated / norm
        if updated @ coeffs < 0:
            updated = -updated
        w = math.sqrt(float(updated @ moments @ updated))
        if (collapse_width > 0 and w < collapse_width) or tail_weight(updated) > TAIL_WEIGHT_LIMIT:
            raise CollapseError(
                f"mode collapsed at step {step} | width: {w:.4f} | tail: {tail_weight(updated):.3e}",
                step=step,
                state=coeffs,
            )
        coeffs = updated

    if coeffs[np.argmax(np.abs(coeffs))] < 0:
        coeffs = -coeffs
    energy = effective_energy(coeffs, g, spec)
    if lhy is not None:
        energy += lhy.energy_per_N(coeffs)
    return coeffs, mu, energy, converged


def solve_effective(N: float, a_s: float, u_mult: float, basis: BasisSpec, exact_u_eff: bool = False,
                    dtau: float = DEFAULT_DTAU, tol: float = DEFAULT_TOL, max_steps: int = DEFAULT_MAX_STEPS,
                    collapse_width: float = DEFAULT_COLLAPSE_WIDTH):
    """
    Relax the single-mode equation [L + u_eff U |phi|^2] phi = 0 in the l = 0 basis.

    Parameters
    ----------
    N : float
        Particle number (> 0).
    a_s : float
        Scattering length (a_ho).
    u_mult : {1, 3}
        1 gives the coherent-state GPE, 3 the squeezed-mode equation.
    basis : BasisSpec
    exact_u_eff : bool
        With u_mult = 3 use 3(1 + 1/(3N)) instead of 3.

    Returns
    -------
    (RadialMode, float, float)
        The mode, its chemical potential and E/N.

    Raises
    ------
    CollapseError
        If the attractive mode collapses; `state` holds the last stable coefficients.
    """
    if not N > 0:
        raise DomainError(f"N must be positive, got {N}")
    u_eff = effective_multiplier(u_mult, N, exact_u_eff)
    g = u_eff * N * a_s
    coeffs, mu, energy, converged = _relax_mode(basis, g, None, dtau, tol, max_steps, collapse_width)
    if not converged:
        logger.warning("effective equation not converged | N: %.6g | a_s: %.6g | u_mult: %s", N, a_s, u_mult)
    mode = RadialMode(coeffs, float(N), u_eff, basis, mu, energy, converged)
    return mode, mu, energy


def solve_lhy_gpe(N: float, a_s: float, basis: BasisSpec, dtau: float = DEFAULT_DTAU, tol: float = DEFAULT_TOL,
                  max_steps: int = DEFAULT_MAX_STEPS, collapse_width: float = DEFAULT_COLLAPSE_WIDTH) -> RadialMode:
    """
    GPE with the LHY term (40/3) U a_s sqrt(a_s/pi) |phi|^3.

    Its energy density is (2/5)(40/3) U a_s sqrt(a_s/pi) |phi|^5. At a_s = 0 this is the plain GPE.

    Raises
    ------
    DomainError
        For a_s < 0 or N <= 0.
    """
    if not N > 0:
        raise DomainError(f"N must be positive, got {N}")
    if a_s < 0:
        raise DomainError("the LHY correction requires a_s >= 0")
    lhy = _LhyTerm(basis, N, a_s) if a_s > 0 else None
    coeffs, mu, energy, converged = _relax_mode(basis, N * a_s, lhy, dtau, tol, max_steps, collapse_width)
    return RadialMode(coeffs, float(N), 1.0, basis, mu, energy, converged)


def lhy_center_shift(mode: RadialMode, a_s: float) -> float:
    """Local LHY chemical-potential shift (40/3) U a_s sqrt(a_s/pi) |phi(0)|^3."""
    n0 = float(np.abs(mode.profile(np.array([0.0]))[0]) ** 2)
    return lhy_mu_shift(n0, a_s)


# --------------------------------------------------------------------------------------
# Collapse threshold
# --------------------------------------------------------------------------------------


def _is_stable(spec: BasisSpec, g: float, max_steps: int) -> bool:
    try:
        _, _, _, converged = _relax_mode(spec, g, max_steps=max_steps)
    except CollapseError:
        return False
    return converged


@lru_cache(maxsize=16)
def _critical_coupling(spec: BasisSpec, resolution: float, max_steps: int) -> float:
    low, high = 0.0, THRESHOLD_G_MAX
    if _is_stable(spec, -high, max_steps):
        logger.warning("no collapse up to |g| = %.3f in this basis", high)
        return high
    while high - low > resolution:
        middle = 0.5 * (low + high)
        if _is_stable(spec, -middle, max_steps):
            low = middle
        else:
            high = middle
        logger.debug("bisection | low: %.6f | high: %.6f", low, high)
    return 0.5 * (low + high)


def collapse_threshold(u_mult: float, basis: BasisSpec, resolution: float = THRESHOLD_RESOLUTION,
                       max_steps: int = DEFAULT_MAX_STEPS) -> float:
    """
    Critical k = N |a_s| / a_ho above which the attractive mode collapses.

    Bisects the effective coupling g = u_mult N |a_s| between converging and
    collapsing relaxations, so k_c(3) * 3 equals k_c(1) up to rounding.
    """
    if u_mult not in (1, 3):
        raise DomainError(f"u_mult must be 1 or 3, got {u_mult}")
    g_c = _critical_coupling(basis, resolution, max_steps)
    k_c = g_c / u_mult
    logger.info("u_mult: %s | k_c: %.4f", u_mult, k_c)
    return k_c


# --------------------------------------------------------------------------------------
# Homogeneous Bogoliubov integrals
# --------------------------------------------------------------------------------------


def _depletion_integrand(q):
    root = math.sqrt(q ** 4 + 2.0 * q ** 2)
    if root == 0.0:
        return 0.0
    # q^2 * 1/2 * ((q^2+1)/root - 1), rationalized
    return 0.5 * q ** 2 / (root * (q ** 2 + 1.0 + root))


def _anomalous_integrand(q):
    root = math.sqrt(q ** 2 + 2.0)
    return 1.0 / (root * (root + q))


def homogeneous_fluctuations(n0: float, a_s: float):
    """
    Depletion and anomalous densities of a homogeneous Bose gas by quadrature.

    With k = sqrt(2 n0 U) q and U = 4 pi a_s,
        n_dep  = (2 n0 U)^{3/2} / (2 pi^2) int q^2 v_q^2 dq
        n_anom = (2 n0 U)^{3/2} / (2 pi^2) int q^2 (u_q v_q - n0 U / (2 eps_q)) dq

    Returns
    -------
    (float, float)
        (n_dep, n_anom); closed forms (8/3) sqrt(n0^3 a_s^3 / pi) and 8 sqrt(n0^3 a_s^3 / pi).

    Raises
    ------
    DomainError
        For n0 <= 0 or a_s <= 0.
    """
    if not n0 > 0:
        raise DomainError(f"n0 must be positive, got {n0}")
    if not a_s > 0:
        raise DomainError("homogeneous fluctuation integrals require a_s > 0")
    U = 4.0 * math.pi * a_s
    scale = (2.0 * n0 * U) ** 1.5 / (2.0 * math.pi ** 2)
    depletion, _ = quad(_depletion_integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    anomalous, _ = quad(_anomalous_integrand, 0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
    return scale * depletion, scale * anomalous


def lhy_mu_shift(n0: float, a_s: float) -> float:
    """delta mu = (40/3) n0 U sqrt(n0 a_s^3 / pi)."""
    return LHY_COEFFICIENT * n0 * 4.0 * math.pi * a_s * math.sqrt(n0 * a_s ** 3 / math.pi)


def lhy_shift_from_densities(n0: float, a_s: float) -> float:
    """delta mu = 2 U n_dep + U n_anom with both densities from quadrature."""
    depletion, anomalous = homogeneous_fluctuations(n0, a_s)
    U = 4.0 * math.pi * a_s
    return 2.0 * U * depletion + U * anomalous


# --------------------------------------------------------------------------------------
# Scans
# --------------------------------------------------------------------------------------


def _scan_point(N, a_s, u_mult, basis, exact_u_eff):
    try:
        mode, mu, energy = solve_effective(N, a_s, u_mult, basis, exact_u_eff)
    except (CollapseError, DivergenceError) as error:
        logger.info("N: %.6g | a_s: %.6g | u_mult: %s | collapsed: %s", N, a_s, u_mult, error)
        return {"N": N, "a_s_over_aho": a_s, "u_mult": u_mult, "converged": False,
                "E_per_N": math.nan, "mu": math.nan, "W": math.nan}
    return {"N": N, "a_s_over_aho": a_s, "u_mult": u_mult, "converged": mode.converged,
            "E_per_N": energy, "mu": mu, "W": mode.width}


def scan(points, u_mult: float, basis: BasisSpec, exact_u_eff: bool = False, jobs: int = 1) -> pd.DataFrame:
    """
    Solve the effective equation on every (N, a_s) point.

    Rows come back in input order with columns N, a_s_over_aho, u_mult, converged, E_per_N, mu, W.
    Collapsed points are kept with converged = False.
    """
    points = list(points)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(lambda p: _scan_point(p[0], p[1], u_mult, basis, exact_u_eff), points))
    return pd.DataFrame(rows, columns=SCAN_COLUMNS)
