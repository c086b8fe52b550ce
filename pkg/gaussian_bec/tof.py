"""
tof.py

Interaction-free time-of-flight of an s-wave mode and the second-order coherence
of a single squeezed mode during the expansion.

The free propagator G(r - r', T) = (2 pi i T)^{-3/2} exp(i |r - r'|^2 / 2T) reduces for
l = 0 to the radial kernel

    K(r, r') = (2 pi i T)^{-3/2} 4 pi r'^2 exp(i (r^2 + r'^2) / 2T) sinc(r r' / T),

integrated with Simpson's rule on a radial grid that widens with T.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.integrate import simpson

from .errors import DomainError

logger = logging.getLogger(__name__)


DEFAULT_R_MAX = 8.0
DEFAULT_POINTS = 2001
GRID_GROWTH = 1.5
NORM_TOL = 1e-6
MIN_DENSITY = 1e-12
TOF_COLUMNS = ["T", "width", "g2"]


@dataclass(frozen=True, eq=False)
class ExpandedMode:
    """Radial samples of the mode f(r, T), normalized with 4 pi r^2 dr."""

    r: np.ndarray = field(repr=False)
    f_T: np.ndarray = field(repr=False)
    T: float
    N: float = 1.0

    @property
    def norm(self) -> float:
        return float(simpson(4.0 * math.pi * self.r ** 2 * np.abs(self.f_T) ** 2, x=self.r))


def ground_mode(r) -> np.ndarray:
    """Oscillator ground state phi_000(r) = pi^{-3/4} exp(-r^2/2)."""
    r = np.asarray(r, dtype=float)
    return math.pi ** -0.75 * np.exp(-0.5 * r ** 2)


def _source(f, r, r_max, points):
    if callable(f):
        grid = np.linspace(0.0, r_max, points)
        return grid, np.asarray(f(grid), dtype=complex)
    if r is None:
        raise DomainError("a sampled profile needs its radial grid")
    grid = np.asarray(r, dtype=float)
    values = np.asarray(f, dtype=complex)
    if grid.shape != values.shape:
        raise DomainError(f"grid and profile shapes differ: {grid.shape} vs {values.shape}")
    return grid, values


def free_propagate(f, T: float, r=None, N: float = 1.0, r_max: float = DEFAULT_R_MAX,
                   points: int = DEFAULT_POINTS) -> ExpandedMode:
    """
    Propagate an s-wave mode freely for a time T (units of 1/omega_ho).

    Parameters
    ----------
    f : callable or np.ndarray
        Mode f(r) as a function, or samples on the grid `r`.
    T : float
        Expansion time, T >= 0. T = 0 returns the input samples unchanged.
    r : np.ndarray, optional
        Source grid when `f` is sampled.
    N : float
        Particle number carried along for the correlators.
    r_max, points : float, int
        Source grid used when `f` is callable.

    Returns
    -------
    ExpandedMode
        Samples on [0, r_max(0) sqrt(1 + T^2) 1.5].

    Raises
    ------
    DomainError
        For T < 0 or an input mode that is not normalized.
    """
    if T < 0:
        raise DomainError(f"expansion time must be non-negative, got {T}")
    grid, values = _source(f, r, r_max, points)
    norm = float(simpson(4.0 * math.pi * grid ** 2 * np.abs(values) ** 2, x=grid))
    if abs(norm - 1.0) > NORM_TOL:
        raise DomainError(f"input mode is not normalized (norm {norm:.8f})")
    if T == 0:
        return ExpandedMode(grid.copy(), values.copy(), 0.0, N)

    extent = grid[-1] * math.sqrt(1.0 + T ** 2) * GRID_GROWTH
    target = np.linspace(0.0, extent, max(points, grid.size))
    prefactor = (2.0 * math.pi * T) ** -1.5 * np.exp(-0.75j * math.pi) * 4.0 * math.pi
    source = grid ** 2 * np.exp(0.5j * grid ** 2 / T) * values
    # np.sinc(x) = sin(pi x) / (pi x)
    kernel = np.sinc(np.outer(target, grid) / (math.pi * T))
    f_T = prefactor * np.exp(0.5j * target ** 2 / T) * simpson(kernel * source, x=grid, axis=1)

    expanded = ExpandedMode(target, f_T, float(T), N)
    logger.debug("T: %.3f | norm: %.8f | extent: %.2f", T, expanded.norm, extent)
    return expanded


def radial_width(mode: ExpandedMode) -> float:
    """RMS radius sqrt(<r^2>) of the expanded mode."""
    density = 4.0 * math.pi * mode.r ** 2 * np.abs(mode.f_T) ** 2
    return math.sqrt(float(simpson(mode.r ** 2 * density, x=mode.r)) / float(simpson(density, x=mode.r)))


def g2_after_expansion(N: float, T: float = 0.0) -> float:
    """g2(0) = 3 + 1/N of a single squeezed mode, unchanged by free expansion."""
    if N <= 0:
        raise DomainError(f"N must be positive, got {N}")
    if T < 0:
        raise DomainError(f"expansion time must be non-negative, got {T}")
    return 3.0 + 1.0 / N


def g2_from_mode(mode: ExpandedMode, N: float = None) -> np.ndarray:
    """
    g2(r) from the rank-1 correlators G = N |f|^2 and F = sqrt(N (N + 1)) f^2.

    Entries where the density is below 1e-12 are NaN.
    """
    N = mode.N if N is None else N
    if N <= 0:
        raise DomainError(f"N must be positive, got {N}")
    normal = N * np.abs(mode.f_T) ** 2
    anomalous = math.sqrt(N * (N + 1.0)) * mode.f_T ** 2
    g2 = np.full(normal.shape, np.nan)
    mask = normal > MIN_DENSITY
    g2[mask] = (2.0 * normal[mask] ** 2 + np.abs(anomalous[mask]) ** 2) / normal[mask] ** 2
    return g2


def expansion_table(f, N: float, T_values, r=None, r_max: float = DEFAULT_R_MAX) -> pd.DataFrame:
    """Rows (T, width, g2) for the tof CSV; g2 is the density-weighted mean of g2(r)."""
    rows = []
    for T in T_values:
        mode = free_propagate(f, float(T), r=r, N=N, r_max=r_max)
        g2 = g2_from_mode(mode)
        mask = np.isfinite(g2)
        weights = (mode.r ** 2 * np.abs(mode.f_T) ** 2)[mask]
        rows.append({"T": float(T), "width": radial_width(mode),
                     "g2": float(np.sum(weights * g2[mask]) / np.sum(weights))})
        logger.info("T: %.3f | width: %.6f | g2: %.8f", T, rows[-1]["width"], rows[-1]["g2"])
    return pd.DataFrame(rows, columns=TOF_COLUMNS)
