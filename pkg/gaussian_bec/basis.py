"""
basis.py

Spherical harmonic-oscillator eigenbasis used by every solver in the package.

It provides:
- the radial eigenfunctions R_nl and eigenenergies of the isotropic trap,
- the four-index interaction tensors M^{l,l1}_{nn'n1n1'} (closed form and quadrature),
- Clebsch-Gordan coefficients and the CG-weighted tensor of the fluctuation sectors,
- a symmetry-reduced tensor container with an optional binary cache file.

Lengths are in units of a_ho and energies in units of hbar*omega_ho.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import eval_genlaguerre, factorial, gammaln, roots_genlaguerre

from .errors import DomainError, QuadratureError

logger = logging.getLogger(__name__)


# --------------------------------------------------------------------------------------
# Global configuration constants
# --------------------------------------------------------------------------------------

DEFAULT_N_CUT = 20
DEFAULT_L_MAX = 4

# Closed-form sums whose cancellation ratio sum|t| / |sum t| exceeds this value
# are re-evaluated by quadrature (relative error estimate above 1e6 * eps).
CANCELLATION_LIMIT = 1.0e6

# Extra quadrature nodes used to confirm convergence of the scalar oracle
QUADRATURE_CHECK_EXTRA = 8
QUADRATURE_RTOL = 1.0e-10

CACHE_MAGIC = b"GBEC"
CACHE_VERSION = 1


@dataclass(frozen=True)
class BasisSpec:
    """
    Truncation of the spherical oscillator basis.

    Parameters
    ----------
    n_cut : int
        Largest radial quantum number kept (inclusive).
    l_max : int
        Largest orbital angular momentum kept (inclusive).
    """

    n_cut: int = DEFAULT_N_CUT
    l_max: int = DEFAULT_L_MAX

    def __post_init__(self):
        if int(self.n_cut) != self.n_cut or self.n_cut < 1:
            raise DomainError(f"n_cut must be an integer >= 1, got {self.n_cut}")
        if int(self.l_max) != self.l_max or self.l_max < 0:
            raise DomainError(f"l_max must be an integer >= 0, got {self.l_max}")

    @property
    def nb(self) -> int:
        """Number of radial functions per angular momentum."""
        return self.n_cut + 1

    @property
    def quadrature_order(self) -> int:
        return 4 * self.n_cut + 2 * self.l_max + 16

    def check(self, n: int, l: int) -> None:
        if not (0 <= n <= self.n_cut) or not (0 <= l <= self.l_max):
            raise DomainError(
                f"quantum numbers (n={n}, l={l}) outside basis "
                f"(n_cut={self.n_cut}, l_max={self.l_max})"
            )


# --------------------------------------------------------------------------------------
# Single-particle functions
# --------------------------------------------------------------------------------------


def _log_norm(n, l):
    return 0.5 * (math.log(2.0) + gammaln(n + 1) - gammaln(n + l + 1.5))


def radial_eigenfunction(n: int, l: int, r, spec: BasisSpec = None):
    """
    Radial oscillator eigenfunction R_nl(r).

    R_nl(r) = sqrt(2 n! / Gamma(n+l+3/2)) r^l exp(-r^2/2) L_n^{(l+1/2)}(r^2),
    which equals the confluent-hypergeometric form and is positive at the origin.

    Parameters
    ----------
    n, l : int
        Radial and orbital quantum numbers.
    r : float or np.ndarray
        Radius (a_ho), r >= 0.
    spec : BasisSpec, optional
        If given, the quantum numbers are checked against the truncation.

    Returns
    -------
    float or np.ndarray
        R_nl evaluated at r.

    Raises
    ------
    DomainError
        For negative or out-of-basis quantum numbers, or negative radii.
    """
    if n < 0 or l < 0 or int(n) != n or int(l) != l:
        raise DomainError(f"invalid quantum numbers (n={n}, l={l})")
    if spec is not None:
        spec.check(n, l)
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise DomainError("radius must be non-negative")
    values = (
        math.exp(_log_norm(n, l))
        * r_arr ** l
        * np.exp(-0.5 * r_arr ** 2)
        * eval_genlaguerre(n, l + 0.5, r_arr ** 2)
    )
    if np.ndim(r) == 0:
        return float(values)
    return values


def radial_grid_values(spec: BasisSpec, l: int, r) -> np.ndarray:
    """All R_nl (n = 0..n_cut) on the grid r, shape (nb, len(r))."""
    r = np.asarray(r, dtype=float)
    return np.array([radial_eigenfunction(n, l, r) for n in range(spec.nb)])


def eigenenergy(n: int, l: int, mu: float = 0.0) -> float:
    """Oscillator level 2n + l + 3/2 measured from the chemical potential."""
    return 2.0 * n + l + 1.5 - mu


def level_energies(spec: BasisSpec, l: int, mu: float = 0.0) -> np.ndarray:
    return np.array([eigenenergy(n, l, mu) for n in range(spec.nb)])


# --------------------------------------------------------------------------------------
# Quadrature
# --------------------------------------------------------------------------------------


@lru_cache(maxsize=64)
def _laguerre_rule(order: int, alpha: float):
    x, w = roots_genlaguerre(order, alpha)
    return x, w


def _reduced_values(n_max: int, l: int, x: np.ndarray) -> np.ndarray:
    """N_nl L_n^{(l+1/2)}(x/2) for n = 0..n_max on the nodes x."""
    return np.array(
        [math.exp(_log_norm(n, l)) * eval_genlaguerre(n, l + 0.5, 0.5 * x) for n in range(n_max + 1)]
    )


def four_radial_integrals(n_max: int, ls, order: int) -> np.ndarray:
    """
    I[n,n',n1,n1'] = int_0^inf dr r^2 R_{n l} R_{n' l'} R_{n1 l1} R_{n1' l1'} for all n <= n_max.

    With x = 2 r^2 the integrand becomes x^alpha exp(-x) times a polynomial in x,
    alpha = (l+l'+l1+l1'+1)/2, which generalized Gauss-Laguerre integrates exactly.
    """
    l_a, l_b, l_c, l_d = ls
    alpha = 0.5 * (l_a + l_b + l_c + l_d + 1)
    x, w = _laguerre_rule(order, alpha)
    scale = 2.0 ** (-alpha) / 4.0
    qa = _reduced_values(n_max, l_a, x)
    qb = qa if l_b == l_a else _reduced_values(n_max, l_b, x)
    qc = _reduced_values(n_max, l_c, x)
    qd = qc if l_d == l_c else _reduced_values(n_max, l_d, x)
    return scale * np.einsum("q,aq,bq,cq,dq->abcd", w, qa, qb, qc, qd, optimize=True)


def _element_quad(ns, ls, order):
    l_a, l_b, l_c, l_d = ls
    alpha = 0.5 * (l_a + l_b + l_c + l_d + 1)
    x, w = _laguerre_rule(order, alpha)
    product = np.ones_like(x)
    for n, l in zip(ns, ls):
        product = product * math.exp(_log_norm(n, l)) * eval_genlaguerre(n, l + 0.5, 0.5 * x)
    return 2.0 ** (-alpha) / 4.0 * float(np.dot(w, product))


def four_l_element_quad(ns, ls, a_s: float = 1.0, order: int = None) -> float:
    """
    Quadrature value of a_s * int r^2 R R R R dr for arbitrary (n_i, l_i).

    Raises
    ------
    QuadratureError
        If two quadrature orders disagree beyond QUADRATURE_RTOL.
    """
    if order is None:
        order = 2 * max(ns) + 2 * max(ls) + 16
    first = _element_quad(ns, ls, order)
    second = _element_quad(ns, ls, order + QUADRATURE_CHECK_EXTRA)
    error = abs(first - second)
    if error > QUADRATURE_RTOL * max(abs(second), 1e-300) and error > 1e-15:
        raise QuadratureError(
            f"radial quadrature not converged for n={ns}, l={ls}",
            estimate=a_s * second,
            error=a_s * error,
        )
    return a_s * second


def interaction_element_quad(n, n_p, n1, n1_p, l, l1, a_s=1.0, spec: BasisSpec = None) -> float:
    """
    Radial-quadrature oracle for the interaction matrix element M^{l,l1}_{nn'n1n1'}.

    Parameters
    ----------
    n, n_p, n1, n1_p : int
        Radial quantum numbers.
    l, l1 : int
        Angular momenta of the (n, n') and (n1, n1') pairs.
    a_s : float
        Scattering length in units of a_ho.
    spec : BasisSpec, optional
        Range check and quadrature order 4 n_cut + 2 l_max + 16.

    Returns
    -------
    float
    """
    ns = (n, n_p, n1, n1_p)
    ls = (l, l, l1, l1)
    _check_indices(ns, ls, spec)
    order = spec.quadrature_order if spec is not None else 2 * max(ns) + 2 * max(ls) + 16
    return four_l_element_quad(ns, ls, a_s, order)


def _check_indices(ns, ls, spec):
    for n, l in zip(ns, ls):
        if n < 0 or l < 0:
            raise DomainError(f"invalid quantum numbers (n={n}, l={l})")
        if spec is not None:
            spec.check(n, l)


# --------------------------------------------------------------------------------------
# Closed form
# --------------------------------------------------------------------------------------


def closed_form_sum(ns, ls):
    """
    Alternating closed-form sum for int r^2 R R R R dr, accumulated in log space.

    Returns
    -------
    (float, float)
        The value (a_s = 1) and the cancellation ratio sum|t| / |sum t|.
    """
    lam = sum(ls)
    log_pref = 0.5 * sum(gammaln(n + 1) + gammaln(n + l + 1.5) for n, l in zip(ns, ls))
    log_pref -= 0.5 * (lam + 1) * math.log(2.0)

    grids = []
    for n, l in zip(ns, ls):
        k = np.arange(n + 1)
        grids.append(-(gammaln(n - k + 1) + gammaln(l + 1.5 + k) + gammaln(k + 1)))
    a1, a2, a3, a4 = np.ix_(*grids)
    k1, k2, k3, k4 = np.ix_(*[np.arange(n + 1) for n in ns])
    big_k = k1 + k2 + k3 + k4

    log_terms = log_pref + a1 + a2 + a3 + a4 + gammaln(0.5 * (3 + lam) + big_k) - big_k * math.log(2.0)
    signs = np.where(big_k % 2 == 0, 1.0, -1.0)
    terms = (signs * np.exp(log_terms)).ravel()

    total = math.fsum(terms)
    magnitude = float(np.sum(np.abs(terms)))
    ratio = math.inf if total == 0.0 else magnitude / abs(total)
    return total, ratio


def four_l_element(ns, ls, a_s=1.0, return_flag=False):
    """Closed-form four-l element with quadrature fallback on heavy cancellation."""
    value, ratio = closed_form_sum(ns, ls)
    fallback = ratio > CANCELLATION_LIMIT
    if fallback:
        logger.warning(
            "closed form cancellation %.3g for n=%s l=%s, using quadrature", ratio, ns, ls
        )
        order = 2 * max(ns) + 2 * max(ls) + 16
        value = four_l_element_quad(ns, ls, 1.0, order)
    value *= a_s
    if return_flag:
        return value, fallback
    return value


def interaction_element(n, n_p, n1, n1_p, l, l1, a_s=1.0, spec: BasisSpec = None, return_flag=False):
    """
    Closed-form interaction matrix element M^{l,l1}_{nn'n1n1'}.

    The alternating (-1/2)^K series is accumulated from log-Gamma terms with
    compensated summation. When the estimated cancellation exceeds
    CANCELLATION_LIMIT the element is recomputed by quadrature and flagged.

    Parameters
    ----------
    n, n_p, n1, n1_p : int
        Radial quantum numbers.
    l, l1 : int
        Angular momenta.
    a_s : float
        Scattering length (a_ho); the element is linear in a_s.
    spec : BasisSpec, optional
        Range check.
    return_flag : bool
        Also return whether the quadrature fallback was used.

    Returns
    -------
    float or (float, bool)
    """
    ns = (n, n_p, n1, n1_p)
    ls = (l, l, l1, l1)
    _check_indices(ns, ls, spec)
    return four_l_element(ns, ls, a_s, return_flag)


# --------------------------------------------------------------------------------------
# Angular momentum coupling
# --------------------------------------------------------------------------------------


def clebsch_gordan(l1, m1, l2, m2, L, M) -> float:
    """
    Condon-Shortley Clebsch-Gordan coefficient <l1 m1; l2 m2 | L M> (Racah formula).

    Returns zero outside the selection rules.
    """
    if M != m1 + m2:
        return 0.0
    if abs(m1) > l1 or abs(m2) > l2 or abs(M) > L:
        return 0.0
    if L < abs(l1 - l2) or L > l1 + l2:
        return 0.0

    def fact(x):
        return factorial(x, exact=True)

    prefactor = (2 * L + 1) * fact(L + l1 - l2) * fact(L - l1 + l2) * fact(l1 + l2 - L)
    prefactor = prefactor / fact(l1 + l2 + L + 1)
    prefactor *= fact(L + M) * fact(L - M) * fact(l1 - m1) * fact(l1 + m1) * fact(l2 - m2) * fact(l2 + m2)

    k_min = max(0, l2 - L - m1, l1 - L + m2)
    k_max = min(l1 + l2 - L, l1 - m1, l2 + m2)
    total = 0.0
    for k in range(k_min, k_max + 1):
        denominator = (
            fact(k)
            * fact(l1 + l2 - L - k)
            * fact(l1 - m1 - k)
            * fact(l2 + m2 - k)
            * fact(L - l2 + m1 + k)
            * fact(L - l1 - m2 + k)
        )
        total += (-1) ** k / denominator
    return math.sqrt(prefactor) * total


def coupling_weight(L, l, l_p) -> float:
    """C^{L0}_{l0,l'0} sqrt((2l+1)(2l'+1)/(2L+1))."""
    return clebsch_gordan(l, 0, l_p, 0, L, 0) * math.sqrt((2 * l + 1) * (2 * l_p + 1) / (2 * L + 1))


def coupled_element(L, l, l_p, l1, l1_p, n, n_p, n1, n1_p, a_s=1.0) -> float:
    """
    CG-weighted tensor entry of the fluctuation sectors.

    M_bar = C^{L0}_{l0l'0} sqrt((2l+1)(2l'+1)/(2L+1)) M^{l l' l1 l1'}_{nn'n1n1'}
            sqrt((2l1+1)(2l1'+1)/(2L+1)) C^{L0}_{l1 0 l1' 0}
    """
    left = coupling_weight(L, l, l_p)
    right = coupling_weight(L, l1, l1_p)
    if left == 0.0 or right == 0.0:
        return 0.0
    return left * right * four_l_element((n, n_p, n1, n1_p), (l, l_p, l1, l1_p), a_s)


# --------------------------------------------------------------------------------------
# Tensor containers
# --------------------------------------------------------------------------------------


def pair_index(nb: int) -> np.ndarray:
    """Map (n, n') to the packed index of the unordered pair."""
    index = np.empty((nb, nb), dtype=int)
    rows, cols = np.triu_indices(nb)
    index[rows, cols] = np.arange(rows.size)
    index[cols, rows] = np.arange(rows.size)
    return index


class InteractionTensor:
    """
    Symmetry-reduced storage of M^{l,l1}_{nn'n1n1'} at a_s = 1.

    Only l <= l1, n <= n' and n1 <= n1' are stored; reads scale by a_s and
    reconstruct the full four-index block. The instance is immutable once built
    and can be shared across threads.
    """

    def __init__(self, spec: BasisSpec, packed: dict):
        self.spec = spec
        self._packed = packed
        self._pairs = pair_index(spec.nb)
        self._full = {}
        self._four_l = {}

    # ---------------------------------------------------------------- construction

    @classmethod
    def build(cls, spec: BasisSpec, method: str = "quadrature", jobs: int = 1):
        """
        Precompute every stored entry.

        Parameters
        ----------
        spec : BasisSpec
        method : {"quadrature", "closed_form"}
            Exact vectorized quadrature, or the per-element closed form
            (slow, meant for small bases and cross-checks).
        jobs : int
            Worker threads over (l, l1) blocks.
        """
        if method not in ("quadrature", "closed_form"):
            raise DomainError(f"unknown tensor method: {method}")

        rows, cols = np.triu_indices(spec.nb)
        blocks = [(l, l1) for l in range(spec.l_max + 1) for l1 in range(l, spec.l_max + 1)]

        def compute(key):
            l, l1 = key
            if method == "quadrature":
                full = four_radial_integrals(spec.n_cut, (l, l, l1, l1), spec.quadrature_order)
                return full[rows, cols][:, rows, cols]
            packed = np.empty((rows.size, rows.size))
            for p, (n, n_p) in enumerate(zip(rows, cols)):
                for q, (n1, n1_p) in enumerate(zip(rows, cols)):
                    packed[p, q] = four_l_element((n, n_p, n1, n1_p), (l, l, l1, l1))
            return packed

        logger.info("building interaction tensor | n_cut: %d | l_max: %d | method: %s",
                    spec.n_cut, spec.l_max, method)
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            results = list(pool.map(compute, blocks))
        return cls(spec, dict(zip(blocks, results)))

    # ---------------------------------------------------------------- reads

    @property
    def n_stored(self) -> int:
        return sum(block.size for block in self._packed.values())

    @property
    def n_full(self) -> int:
        return (self.spec.l_max + 1) ** 2 * self.spec.nb ** 4

    def packed(self, l: int, l1: int) -> np.ndarray:
        return self._packed[(l, l1)]

    def block(self, l: int, l1: int, a_s: float = 1.0) -> np.ndarray:
        """Full M^{l,l1}[n, n', n1, n1'] scaled by a_s."""
        key = (l, l1)
        if key not in self._full:
            if l <= l1:
                packed = self._packed[key]
                p = self._pairs
                self._full[key] = packed[p[:, :, None, None], p[None, None, :, :]]
            else:
                self._full[key] = self.block(l1, l).transpose(2, 3, 0, 1)
            self._full[key].flags.writeable = False
        if a_s == 1.0:
            return self._full[key]
        return a_s * self._full[key]

    def __getitem__(self, index):
        l, l1, n, n_p, n1, n1_p = index
        if l > l1:
            l, l1, n, n_p, n1, n1_p = l1, l, n1, n1_p, n, n_p
        return float(self._packed[(l, l1)][self._pairs[n, n_p], self._pairs[n1, n1_p]])

    def four_l_block(self, l, l_p, l1, l1_p) -> np.ndarray:
        """Full four-l tensor int r^2 R_{nl} R_{n'l'} R_{n1 l1} R_{n1' l1'} at a_s = 1."""
        key = (l, l_p, l1, l1_p)
        if key not in self._four_l:
            self._four_l[key] = four_radial_integrals(self.spec.n_cut, key, self.spec.quadrature_order)
        return self._four_l[key]

    # ---------------------------------------------------------------- cache file

    def save(self, path) -> None:
        """
        Write the binary cache: magic "GBEC", u32 version, u32 n_cut, u32 l_max,
        then little-endian f64 entries ordered by l, l1 >= l, packed (n <= n'),
        packed (n1 <= n1'), all lexicographic.
        """
        header = np.array([CACHE_VERSION, self.spec.n_cut, self.spec.l_max], dtype="<u4")
        with open(path, "wb") as f:
            f.write(CACHE_MAGIC)
            f.write(header.tobytes())
            for l in range(self.spec.l_max + 1):
                for l1 in range(l, self.spec.l_max + 1):
                    f.write(np.ascontiguousarray(self._packed[(l, l1)], dtype="<f8").tobytes())

    @classmethod
    def load(cls, path):
        raw = Path(path).read_bytes()
        if raw[:4] != CACHE_MAGIC:
            raise DomainError(f"{path} is not a tensor cache file")
        version, n_cut, l_max = np.frombuffer(raw[4:16], dtype="<u4")
        if version != CACHE_VERSION:
            raise DomainError(f"unsupported tensor cache version {version}")
        spec = BasisSpec(int(n_cut), int(l_max))
        n_pairs = spec.nb * (spec.nb + 1) // 2
        data = np.frombuffer(raw[16:], dtype="<f8")
        expected = n_pairs * n_pairs * (spec.l_max + 1) * (spec.l_max + 2) // 2
        if data.size != expected:
            raise DomainError(f"truncated tensor cache: {data.size} of {expected} entries")
        packed = {}
        offset = 0
        for l in range(spec.l_max + 1):
            for l1 in range(l, spec.l_max + 1):
                packed[(l, l1)] = data[offset:offset + n_pairs * n_pairs].reshape(n_pairs, n_pairs).copy()
                offset += n_pairs * n_pairs
        return cls(spec, packed)


class CoupledTensor:
    """
    CG-weighted tensor M_bar for one total angular momentum L, at a_s = 1.

    Blocks are keyed by two ordered channels (l, l') and (l1, l1') and are built
    on first use from the four-l radial integrals of an InteractionTensor.
    """

    def __init__(self, L: int, tensors: InteractionTensor):
        if L < 0:
            raise DomainError(f"L must be non-negative, got {L}")
        self.L = L
        self.tensors = tensors
        self.spec = tensors.spec
        self._blocks = {}

    def block(self, channel, channel1, a_s: float = 1.0) -> np.ndarray:
        key = (tuple(channel), tuple(channel1))
        if key not in self._blocks:
            (l, l_p), (l1, l1_p) = key
            weight = coupling_weight(self.L, l, l_p) * coupling_weight(self.L, l1, l1_p)
            if weight == 0.0:
                nb = self.spec.nb
                self._blocks[key] = np.zeros((nb, nb, nb, nb))
            else:
                self._blocks[key] = weight * self.tensors.four_l_block(l, l_p, l1, l1_p)
        return a_s * self._blocks[key]

    def matrix(self, channel, channel1, a_s: float = 1.0) -> np.ndarray:
        """The block flattened to (nb^2, nb^2) over (n, n') and (n1, n1')."""
        nb = self.spec.nb
        return self.block(channel, channel1, a_s).reshape(nb * nb, nb * nb)


@lru_cache(maxsize=128)
def radial_moment_matrix(spec: BasisSpec, l: int, power: int = 2) -> np.ndarray:
    """Matrix <n l| r^power |n' l> by exact Gauss-Laguerre quadrature (even power)."""
    if power % 2:
        raise DomainError("only even radial moments are supported")
    alpha = l + 0.5 + power // 2
    order = spec.quadrature_order
    x, w = _laguerre_rule(order, alpha)
    # r^2 dr R R r^power with x = r^2: 1/2 x^{l+1/2+power/2} exp(-x) L L
    values = np.array(
        [math.exp(_log_norm(n, l)) * eval_genlaguerre(n, l + 0.5, x) for n in range(spec.nb)]
    )
    moments = 0.5 * np.einsum("q,aq,bq->ab", w, values, values)
    moments.flags.writeable = False
    return moments
