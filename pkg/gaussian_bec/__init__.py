"""Gaussian-state variational solver for a trapped Bose gas."""

__version__ = "1.0.0"

from .basis import BasisSpec, CoupledTensor, InteractionTensor, interaction_element, radial_eigenfunction
from .errors import (
    AssemblyError,
    CollapseError,
    ConfigError,
    DivergenceError,
    DomainError,
    GaussianBECError,
    NoSqueezedModeError,
    QuadratureError,
)
from .fluct import ModeRecord, SectorOperator, assemble_sector, classify_mode, density_fluctuation, diagonalize_sector, spectrum
from .gpe import RadialMode, collapse_threshold, homogeneous_fluctuations, solve_effective, solve_lhy_gpe
from .ground import BogoliubovBasis, ConvergenceReport, Phase, SolverConfig, detect_phase, solve_ground, symplectic_diagonalize
from .gstate import GaussianState, build_mean_field, extract_squeezed_mode, g2_local, total_energy, width
from .tof import ExpandedMode, free_propagate, g2_after_expansion

__all__ = [
    "__version__",
    "AssemblyError",
    "BasisSpec",
    "BogoliubovBasis",
    "CollapseError",
    "ConfigError",
    "ConvergenceReport",
    "CoupledTensor",
    "DivergenceError",
    "DomainError",
    "ExpandedMode",
    "GaussianBECError",
    "GaussianState",
    "InteractionTensor",
    "ModeRecord",
    "NoSqueezedModeError",
    "Phase",
    "QuadratureError",
    "RadialMode",
    "SectorOperator",
    "SolverConfig",
    "assemble_sector",
    "build_mean_field",
    "classify_mode",
    "collapse_threshold",
    "density_fluctuation",
    "detect_phase",
    "diagonalize_sector",
    "extract_squeezed_mode",
    "free_propagate",
    "g2_after_expansion",
    "g2_local",
    "homogeneous_fluctuations",
    "interaction_element",
    "radial_eigenfunction",
    "solve_effective",
    "solve_ground",
    "solve_lhy_gpe",
    "spectrum",
    "symplectic_diagonalize",
    "total_energy",
    "width",
]
