#!/usr/bin/env python3
"""
SweepPlots.py

This script reads the sweep CSV produced by Simulation/SuperMain.py and generates
three panels against the coupling N a_s / a_ho:

    (a) condensate fraction N_c / N of the Gaussian ground state,
    (b) energy per particle of the Gaussian state, the GPE and the squeezed-mode equation,
    (c) rms width per particle of the same three solutions.

The figure is saved as both PDF and PNG in the current working directory.
"""

import os
import sys

import matplotlib.pyplot as plt
import pandas as pd


# =============================================================================
# Configuration
# =============================================================================

# Default input CSV (can be overridden via CLI argument)
DEFAULT_CSV_PATH = "../Simulation/sweep_results.csv"

# Output file names
OUTPUT_PDF_NAME = "ground_state_sweep.pdf"
OUTPUT_PNG_NAME = "ground_state_sweep.png"

REQUIRED_COLUMNS = [
    "a_s_over_aho_times_N",
    "condensate_fraction",
    "E_per_N",
    "W",
    "E_per_N_gpe",
    "W_gpe",
    "E_per_N_squeezed",
    "W_squeezed",
]

BASE_FONT_SIZE = 12
plt.rcParams.update({
    "font.size": BASE_FONT_SIZE,
    "axes.titlesize": BASE_FONT_SIZE,
    "axes.labelsize": BASE_FONT_SIZE,
    "xtick.labelsize": BASE_FONT_SIZE - 1,
    "ytick.labelsize": BASE_FONT_SIZE - 1,
    "legend.fontsize": BASE_FONT_SIZE - 2,
})


# =============================================================================
# Main
# =============================================================================

def main(csv_path: str) -> None:
    """
    Load the sweep CSV and draw the condensate fraction, energy and width panels.

    Parameters
    ----------
    csv_path : str
        Path to the sweep results CSV file.
    """
    try:
        df = pd.read_csv(csv_path, sep=";")
    except FileNotFoundError:
        print(f"[ERROR] CSV file not found: {csv_path}")
        return

    missing = [c for c in REQUIRED_COLUMNS if c not in df.columns]
    if missing:
        print(f"[ERROR] Missing required columns in CSV: {missing}")
        return

    for col in REQUIRED_COLUMNS:
        df[col] = pd.to_numeric(df[col], errors="coerce")
    df = df.sort_values("a_s_over_aho_times_N")
    x = df["a_s_over_aho_times_N"].values

    fig, axes = plt.subplots(3, 1, figsize=(6.0, 8.0), dpi=300, sharex=True)

    axes[0].plot(x, df["condensate_fraction"].values, "o-", linewidth=1.0, markersize=4)
    axes[0].set_ylabel(r"$N_c / N$")
    axes[0].set_ylim(-0.05, 1.05)

    for suffix, label, style in [("", "Gaussian state", "o-"), ("_gpe", "GPE", "--"), ("_squeezed", "3U equation", ":")]:
        axes[1].plot(x, df[f"E_per_N{suffix}"].values, style, label=label, linewidth=1.0, markersize=4)
        axes[2].plot(x, df[f"W{suffix}"].values, style, label=label, linewidth=1.0, markersize=4)
    axes[1].set_ylabel(r"$E / N$ ($\hbar\omega_{ho}$)")
    axes[2].set_ylabel(r"$W$ ($a_{ho}$)")
    axes[2].set_xlabel(r"$N a_s / a_{ho}$")
    axes[1].legend(loc="best")

    for ax in axes:
        ax.axvline(0.0, color="grey", linewidth=0.6)
        ax.grid(True, linestyle=":", linewidth=0.6, alpha=0.7)

    fig.tight_layout()

    pdf_path = os.path.abspath(OUTPUT_PDF_NAME)
    png_path = os.path.abspath(OUTPUT_PNG_NAME)
    fig.savefig(pdf_path, bbox_inches="tight")
    fig.savefig(png_path, bbox_inches="tight")

    print(f"[INFO] Saved: {pdf_path}")
    print(f"[INFO] Saved: {png_path}")

    plt.close(fig)


if __name__ == "__main__":
    # Example:
    #   python SweepPlots.py ../Simulation/sweep_results.csv
    csv_file = sys.argv[1] if len(sys.argv) > 1 else DEFAULT_CSV_PATH
    main(csv_file)
