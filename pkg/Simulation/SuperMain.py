"""
SuperMain.py

This script runs the full calculation campaign for a trapped Bose gas described by
Gaussian states.

It:
- Builds (or loads from cache) the interaction tensor for the chosen basis.
- Sweeps the dimensionless coupling N a_s / a_ho across the CSC -> SSC transition.
- For each coupling:
    * relaxes the Gaussian ground state (coherent and squeezed seeds, lower energy wins),
    * solves the coherent-state GPE (u_mult = 1) and the squeezed-mode equation (u_mult = 3),
    * records condensate fraction, energy per particle and width of all three.
- For a subset of couplings, computes the collective modes of the L = 0, 1, 2 sectors.
- Saves the results to sweep_results.csv and spectrum.csv (';'-separated).
"""

import sys
import time
from pathlib import Path

import pandas as pd

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from gaussian_bec import cli  # noqa: E402
from gaussian_bec.results import write_table  # noqa: E402


# --------------------------------------------------------------------------------------
# Global configuration constants
# --------------------------------------------------------------------------------------

# Particle number of the cloud
N = 1.0e4

# Basis truncation
N_CUT = 15
L_MAX = 3

# Tensor cache, rebuilt when missing or built for another basis
TENSOR_CACHE = "tensor_n15_l3.gbec"

# Couplings N a_s / a_ho of the sweep (inclusive range)
NA_S_START = -0.40
NA_S_STOP = 0.30
NA_S_STEP = 0.05

# Couplings for which the collective modes are computed
SPECTRUM_POINTS = (-0.10, -0.05, 0.05, 0.20)
SPECTRUM_L = (0, 1, 2)

# Worker threads for points and sectors
JOBS = 4

# Output files for all results
OUT_DIR = "."
SWEEP_CSV = "sweep_results.csv"

# Effective-equation columns of the merged sweep table
EFFECTIVE_NAMES = {1.0: "gpe", 3.0: "squeezed"}


# --------------------------------------------------------------------------------------
# Utility functions
# --------------------------------------------------------------------------------------


def run_config(mode: str, na_s) -> cli.RunConfig:
    """Campaign settings as a validated run configuration."""
    config = cli.RunConfig(
        mode=mode, N=N, na_s=tuple(na_s), u_mult=3.0, L=SPECTRUM_L,
        n_cut=N_CUT, l_max=L_MAX, cache=TENSOR_CACHE, out_dir=OUT_DIR, format="csv",
    )
    cli.validate(config)
    return config


def merge_sweep(sweep_path: Path, scan_path: Path) -> pd.DataFrame:
    """
    Join the Gaussian sweep with the effective-equation scans.

    Parameters
    ----------
    sweep_path, scan_path : Path
        Tables written by the sweep run.

    Returns
    -------
    pd.DataFrame
        One row per coupling with E_per_N_<name> and W_<name> for every multiplier.
    """
    sweep = pd.read_csv(sweep_path, sep=";")
    scan = pd.read_csv(scan_path, sep=";")
    scan["a_s_over_aho_times_N"] = (scan["a_s_over_aho"] * scan["N"]).round(12)
    sweep["a_s_over_aho_times_N"] = sweep["a_s_over_aho_times_N"].round(12)
    for u_mult, name in EFFECTIVE_NAMES.items():
        part = scan[scan["u_mult"] == u_mult][["a_s_over_aho_times_N", "E_per_N", "W"]]
        part = part.rename(columns={"E_per_N": f"E_per_N_{name}", "W": f"W_{name}"})
        sweep = sweep.merge(part, on="a_s_over_aho_times_N", how="left")
    return sweep


# --------------------------------------------------------------------------------------
# Main calculation procedure
# --------------------------------------------------------------------------------------


def main():
    started = time.perf_counter()

    sweep_config = run_config("sweep", cli.parse_range(f"{NA_S_START}:{NA_S_STOP}:{NA_S_STEP}"))
    cli.load_tensors(sweep_config, JOBS)
    print(f"run: sweep | N: {N:.0f} | points: {len(sweep_config.na_s)}")
    sweep_path, scan_path = cli.run_sweep(sweep_config, JOBS, started)

    merged = merge_sweep(sweep_path, scan_path)
    write_table(merged, Path(OUT_DIR) / SWEEP_CSV)
    print(f"Final CSV written to: {SWEEP_CSV}")

    spectrum_config = run_config("spectrum", SPECTRUM_POINTS)
    print(f"run: spectrum | points: {list(SPECTRUM_POINTS)} | L: {list(SPECTRUM_L)}")
    (spectrum_path,) = cli.run_spectrum(spectrum_config, JOBS, started)
    print(f"Final CSV written to: {spectrum_path}")


if __name__ == "__main__":
    main()
