#!/usr/bin/env python3
"""
SpectrumPlots.py

Given the spectrum CSV produced by Simulation/SuperMain.py (or by the `spectrum`
mode of the command-line runner), this script creates, for each angular momentum L,
a scatter plot of the collective-mode frequencies against N a_s / a_ho.

Markers are coloured by the one-particle weight of each mode, so that Bogoliubov-like
(1PE) and pair-like (2PE) modes can be told apart. Figures are saved as PNG and PDF.
"""

import sys

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd


# =============================================================================
# Global plotting configuration
# =============================================================================

BASE_FONT_SIZE = 12

plt.rcParams.update({
    "font.size": BASE_FONT_SIZE,
    "axes.titlesize": BASE_FONT_SIZE,
    "axes.labelsize": BASE_FONT_SIZE,
    "xtick.labelsize": BASE_FONT_SIZE - 1,
    "ytick.labelsize": BASE_FONT_SIZE - 1,
    "legend.fontsize": BASE_FONT_SIZE - 1,
})

DEFAULT_CSV_PATH = "../Simulation/spectrum.csv"

# Frequencies above this value are left out of the plots
OMEGA_MAX = 6.0


# =============================================================================
# Helper functions
# =============================================================================

def plot_sector(df: pd.DataFrame, L: int) -> None:
    """
    Scatter plot of omega against the coupling for a single L sector.

    Parameters
    ----------
    df : pd.DataFrame
        Spectrum table restricted to finite frequencies.
    L : int
        Total angular momentum of the sector.
    """
    sector = df[(df["L"] == L) & (df["omega"] <= OMEGA_MAX)]
    if sector.empty:
        print(f"[WARNING] No modes with omega <= {OMEGA_MAX} for L = {L}.")
        return

    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=300)
    points = ax.scatter(
        sector["a_s_over_aho_times_N"].values,
        sector["omega"].values,
        c=sector["weight_1pe"].values,
        cmap="coolwarm",
        vmin=0.0,
        vmax=1.0,
        s=14,
    )
    fig.colorbar(points, ax=ax, label="1PE weight")

    # Trap frequency reference (Kohn mode for L = 1)
    ax.axhline(1.0, color="grey", linewidth=0.6, linestyle="--")
    ax.set_xlabel(r"$N a_s / a_{ho}$")
    ax.set_ylabel(r"$\omega$ ($\omega_{ho}$)")
    ax.set_title(f"L = {L}")
    ax.set_ylim(-0.1, OMEGA_MAX)
    ax.grid(True, linestyle=":", linewidth=0.6, alpha=0.7)

    fig.tight_layout()

    png_name = f"spectrum_L{L}.png"
    pdf_name = f"spectrum_L{L}.pdf"
    fig.savefig(png_name, bbox_inches="tight")
    fig.savefig(pdf_name, bbox_inches="tight")
    plt.close(fig)

    print(f"[INFO] Saved: {png_name}")
    print(f"[INFO] Saved: {pdf_name}")


# =============================================================================
# Main
# =============================================================================

def main(csv_path: str) -> None:
    try:
        df = pd.read_csv(csv_path, sep=";")
    except FileNotFoundError:
        print(f"[ERROR] CSV file not found: {csv_path}")
        return

    required = ["a_s_over_aho_times_N", "L", "omega", "weight_1pe"]
    missing = [c for c in required if c not in df.columns]
    if missing:
        print(f"[ERROR] Missing required columns in CSV: {missing}")
        return

    for col in required:
        df[col] = pd.to_numeric(df[col], errors="coerce")
    df = df[np.isfinite(df["omega"])]

    for L in sorted(df["L"].dropna().unique()):
        plot_sector(df, int(L))


if __name__ == "__main__":
    csv_file = sys.argv[1] if len(sys.argv) > 1 else DEFAULT_CSV_PATH
    main(csv_file)
