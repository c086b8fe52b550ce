"""
cli.py

Command-line runner: parses an INI-like run configuration, dispatches one of the run
modes and writes `;`-separated tables with JSON sidecars.

Modes:
- ground:    Gaussian ground state per N a_s / a_ho point, plus a JSON state snapshot.
- sweep:     Ground-state sweep (N_c/N, E/N, W against N a_s / a_ho) and the matching
             effective-equation scans (u_mult = 1 and u_mult from the config).
- spectrum:  Collective modes per L sector on top of each ground state.
- tof:       Free expansion of the squeezed mode (or the oscillator ground mode).
- threshold: Collapse thresholds k_c for u_mult = 1 and 3.
"""

import argparse
import logging
import math
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import pandas as pd

from . import __version__
from .basis import DEFAULT_L_MAX, DEFAULT_N_CUT, BasisSpec, InteractionTensor, radial_grid_values
from .errors import CollapseError, ConfigError, DomainError, GaussianBECError, NoSqueezedModeError
from .fluct import SPECTRUM_COLUMNS, spectrum
from .gpe import collapse_threshold, scan
from .ground import (
    DEFAULT_SEED,
    INTEGRATORS,
    SEED_MODES,
    SolverConfig,
    detect_phase,
    solve_ground,
    symplectic_diagonalize,
)
from .gstate import build_mean_field, extract_squeezed_mode, particle_numbers, width
from .results import FORMATS, write_sidecar, write_table
from .tof import DEFAULT_R_MAX, expansion_table, ground_mode

logger = logging.getLogger(__name__)


MODES = ("ground", "sweep", "spectrum", "tof", "threshold")
DEFAULT_MODE = "ground"
DEFAULT_U_MULT = 3.0
DEFAULT_OUT_DIR = "results"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3

GROUND_COLUMNS = [
    "a_s_over_aho_times_N", "N", "converged", "collapsed", "phase", "condensate_fraction",
    "E_per_N", "mu", "W", "steps",
]
SWEEP_COLUMNS = ["a_s_over_aho_times_N", "N", "converged", "collapsed", "phase", "condensate_fraction", "E_per_N", "W"]
THRESHOLD_COLUMNS = ["u_mult", "k_c"]

LINE_PATTERN = re.compile(r"^([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^=]*)$")
SECTION_PATTERN = re.compile(r"^\[([A-Za-z_]+)\]$")


# --------------------------------------------------------------------------------------
# Configuration
# --------------------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    """
    Validated run configuration.

    `na_s` holds N a_s / a_ho values; the scattering length of a point is na_s / N.
    `solver` holds SolverConfig keyword arguments other than target_N and a_s.
    """

    mode: str = DEFAULT_MODE
    N: float = None
    na_s: tuple = ()
    u_mult: float = DEFAULT_U_MULT
    T: tuple = (0.0, 1.0, 3.0)
    L: tuple = (0, 1, 2)
    exact_u_eff: bool = False
    n_cut: int = DEFAULT_N_CUT
    l_max: int = DEFAULT_L_MAX
    s_cut: int = None
    cache: str = None
    solver: dict = field(default_factory=lambda: {"seed": DEFAULT_SEED})
    out_dir: str = DEFAULT_OUT_DIR
    format: str = "csv"
    prefix: str = ""

    @property
    def basis(self) -> BasisSpec:
        return BasisSpec(self.n_cut, self.l_max)

    @property
    def seed(self) -> int:
        return self.solver.get("seed", DEFAULT_SEED)

    def solver_config(self, na_s: float) -> SolverConfig:
        return SolverConfig(target_N=self.N, a_s=na_s / self.N, **self.solver)


def _to_bool(text):
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _to_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"not a finite number: {text!r}")
    return value


def _to_int(text):
    value = float(text)
    if int(value) != value:
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def parse_range(text):
    """A scalar, a comma list, or start:stop:step with an inclusive stop."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"range needs start:stop:step, got {text!r}")
        start, stop, step = (_to_float(p) for p in parts)
        if step == 0 or (stop - start) * step < 0:
            raise ValueError(f"step {step} does not lead from {start} to {stop}")
        count = int(round((stop - start) / step)) + 1
        return tuple(round(start + k * step, 12) for k in range(count))
    values = tuple(_to_float(p) for p in text.split(",") if p.strip())
    if not values:
        raise ValueError("empty list")
    return values


def _int_list(text):
    values = tuple(_to_int(p) for p in text.split(",") if p.strip())
    if not values:
        raise ValueError("empty list")
    return values


def _choice(options):
    def convert(text):
        if text not in options:
            raise ValueError(f"{text!r} is not one of {options}")
        return text
    return convert


SCHEMA = {
    "physics": {
        "mode": _choice(MODES),
        "N": _to_float,
        "na_s": parse_range,
        "u_mult": _to_float,
        "T": parse_range,
        "L": _int_list,
        "exact_u_eff": _to_bool,
        "seed": _to_int,
    },
    "basis": {"n_cut": _to_int, "l_max": _to_int, "s_cut": _to_int, "cache": str},
    "solver": {
        "dtau": _to_float,
        "tol_eta": _to_float,
        "tol_gamma": _to_float,
        "max_steps": _to_int,
        "mu_tol": _to_float,
        "seed_mode": _choice(SEED_MODES + ("vacuum+noise",)),
        "seed": _to_int,
        "collapse_width": _to_float,
        "relax_rate": _to_float,
        "integrator": _choice(INTEGRATORS),
        "max_dtau": _to_float,
    },
    "output": {"out_dir": str, "format": _choice(FORMATS), "prefix": str},
}


def parse_config(text: str, mode: str = None, seed: int = None) -> RunConfig:
    """
    Parse `key = value` lines grouped in [physics], [basis], [solver] and [output].

    Comments start with '#'. Keys before the first section header count as [physics].
    `mode` and `seed` override the file before validation.

    Raises
    ------
    ConfigError
        On malformed lines, unknown sections or keys, unconvertible values and
        inconsistent combinations; the line number is attached where one applies.
    """
    section = "physics"
    values, solver = {}, {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = SECTION_PATTERN.match(line)
        if header:
            section = header.group(1)
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=number)
            continue
        match = LINE_PATTERN.match(line)
        if not match:
            raise ConfigError(f"malformed line {raw.strip()!r}", line=number)
        key, value = match.group(1), match.group(2).strip()
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key {key!r} in [{section}]", line=number, key=key)
        if not value:
            raise ConfigError(f"missing value for {key!r}", line=number, key=key)
        try:
            converted = SCHEMA[section][key](value)
        except ValueError as error:
            raise ConfigError(f"bad value for {key!r}: {error}", line=number, key=key) from None
        if section == "solver" or key == "seed":
            solver[key] = converted
        else:
            values[key] = converted

    if mode is not None:
        values["mode"] = mode
    if seed is not None:
        solver["seed"] = seed
    solver.setdefault("seed", DEFAULT_SEED)
    config = RunConfig(**values, solver=solver)
    validate(config)
    return config


def validate(config: RunConfig) -> None:
    """Cross-field checks for the selected mode."""
    if config.mode not in MODES:
        raise ConfigError(f"unknown mode {config.mode!r}", key="mode")
    if config.mode != "threshold":
        if config.N is None:
            raise ConfigError("N is required", key="N")
        if not config.N > 0:
            raise ConfigError("N must be positive", key="N")
    if config.mode in ("ground", "sweep", "spectrum") and not config.na_s:
        raise ConfigError("na_s is required", key="na_s")
    if config.u_mult not in (1.0, 3.0):
        raise ConfigError("u_mult must be 1 or 3", key="u_mult")
    if any(t < 0 for t in config.T):
        raise ConfigError("expansion times must be non-negative", key="T")
    if config.mode == "spectrum" and any(L < 0 or L > config.l_max for L in config.L):
        raise ConfigError(f"L values must lie in [0, l_max={config.l_max}]", key="L")
    try:
        BasisSpec(config.n_cut, config.l_max)
        if config.N is not None:
            for na_s in config.na_s[:1] or (0.0,):
                config.solver_config(na_s)
    except DomainError as error:
        raise ConfigError(str(error)) from None
    except TypeError as error:
        raise ConfigError(str(error)) from None


# --------------------------------------------------------------------------------------
# Runs
# --------------------------------------------------------------------------------------


def load_tensors(config: RunConfig, jobs: int = 1) -> InteractionTensor:
    """Interaction tensor from the cache file when it matches the basis, built otherwise."""
    spec = config.basis
    if config.cache and Path(config.cache).exists():
        tensors = InteractionTensor.load(config.cache)
        if tensors.spec == spec:
            logger.info("tensor cache: %s", config.cache)
            return tensors
        logger.warning("tensor cache %s is for %s, rebuilding", config.cache, tensors.spec)
    tensors = InteractionTensor.build(spec, jobs=jobs)
    if config.cache:
        tensors.save(config.cache)
    return tensors


def _ground_point(config: RunConfig, tensors, na_s: float):
    """Solve one point; any solver failure is recorded in the row, not raised."""
    try:
        state, report = solve_ground(config.solver_config(na_s), tensors)
    except GaussianBECError as error:
        collapsed = isinstance(error, CollapseError)
        logger.info("na_s: %.4f | failed: %s", na_s, error)
        row = {"a_s_over_aho_times_N": na_s, "N": config.N, "converged": False,
               "collapsed": collapsed, "phase": "collapsed" if collapsed else "failed",
               "condensate_fraction": math.nan, "E_per_N": math.nan, "mu": math.nan,
               "W": math.nan, "steps": getattr(error, "step", None)}
        return None, None, row
    n_c, n_d = particle_numbers(state)
    row = {"a_s_over_aho_times_N": na_s, "N": config.N, "converged": report.converged,
           "collapsed": report.collapsed, "phase": detect_phase(state).value,
           "condensate_fraction": n_c / (n_c + n_d), "E_per_N": report.E / report.N,
           "mu": report.mu, "W": width(state), "steps": report.steps}
    logger.info("na_s: %.4f | phase: %s | E/N: %.8f | W: %.6f", na_s, row["phase"], row["E_per_N"], row["W"])
    return state, report, row


def _ground_points(config, tensors, jobs):
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(lambda na_s: _ground_point(config, tensors, na_s), config.na_s))


def _output(config: RunConfig, name: str) -> Path:
    suffix = "csv" if config.format == "csv" else "json"
    return Path(config.out_dir) / f"{config.prefix}{name}.{suffix}"


def run_ground(config, jobs, started):
    tensors = load_tensors(config, jobs)
    outcomes = _ground_points(config, tensors, jobs)
    path = write_table(pd.DataFrame([o[2] for o in outcomes], columns=GROUND_COLUMNS),
                       _output(config, "ground"), config.format)
    reports = []
    for index, (state, report, _) in enumerate(outcomes):
        if state is not None:
            state.save(Path(config.out_dir) / f"{config.prefix}ground_state_{index}.json")
            reports.append(report.to_dict())
        else:
            reports.append(None)
    write_sidecar(path, config, __version__, started, {"reports": reports})
    return [path]


def run_sweep(config, jobs, started):
    tensors = load_tensors(config, jobs)
    outcomes = _ground_points(config, tensors, jobs)
    sweep = pd.DataFrame([o[2] for o in outcomes], columns=GROUND_COLUMNS)[SWEEP_COLUMNS]
    sweep_path = write_table(sweep, _output(config, "sweep"), config.format)
    write_sidecar(sweep_path, config, __version__, started)

    points = [(config.N, na_s / config.N) for na_s in config.na_s]
    multipliers = sorted({1.0, config.u_mult})
    effective = pd.concat(
        [scan(points, u_mult, config.basis, config.exact_u_eff, jobs) for u_mult in multipliers],
        ignore_index=True,
    )
    scan_path = write_table(effective, _output(config, "scan"), config.format)
    write_sidecar(scan_path, config, __version__, started)
    return [sweep_path, scan_path]


def run_spectrum(config, jobs, started):
    tensors = load_tensors(config, jobs)
    rows, skipped = [], []
    for na_s in config.na_s:
        state, _, row = _ground_point(config, tensors, na_s)
        if state is None:
            skipped.append(na_s)
            continue
        bogo = symplectic_diagonalize(build_mean_field(state, tensors))
        modes = spectrum(config.L, state, bogo, tensors, s_cut=config.s_cut, jobs=jobs)
        rows += [mode.as_row(na_s) for mode in modes]
        logger.info("na_s: %.4f | phase: %s | modes: %d", na_s, row["phase"], len(modes))
    path = write_table(pd.DataFrame(rows, columns=SPECTRUM_COLUMNS), _output(config, "spectrum"), config.format)
    write_sidecar(path, config, __version__, started, {"skipped_points": skipped})
    return [path]


def _squeezed_profile(config, jobs):
    """Squeezed mode of the first na_s point as a function of r, or None."""
    if not config.na_s:
        return None
    tensors = load_tensors(config, jobs)
    state, _, _ = _ground_point(config, tensors, config.na_s[0])
    if state is None:
        return None
    try:
        f, _, _ = extract_squeezed_mode(state)
    except NoSqueezedModeError as error:
        logger.warning("no squeezed mode: %s", error)
        return None
    spec = config.basis
    return lambda r: (f @ radial_grid_values(spec, 0, r)) / math.sqrt(4.0 * math.pi)


def run_tof(config, jobs, started):
    profile = _squeezed_profile(config, jobs)
    if profile is None:
        logger.info("expanding the oscillator ground mode")
        profile, r_max = ground_mode, DEFAULT_R_MAX
    else:
        r_max = max(DEFAULT_R_MAX, math.sqrt(4 * config.n_cut + 3) + 4.0)
    table = expansion_table(profile, config.N, config.T, r_max=r_max)
    path = write_table(table, _output(config, "tof"), config.format)
    write_sidecar(path, config, __version__, started)
    return [path]


def run_threshold(config, jobs, started):
    rows = [{"u_mult": u_mult, "k_c": collapse_threshold(u_mult, config.basis)} for u_mult in (1, 3)]
    path = write_table(pd.DataFrame(rows, columns=THRESHOLD_COLUMNS), _output(config, "threshold"), config.format)
    write_sidecar(path, config, __version__, started)
    return [path]


RUNNERS = {
    "ground": run_ground,
    "sweep": run_sweep,
    "spectrum": run_spectrum,
    "tof": run_tof,
    "threshold": run_threshold,
}


def run(config: RunConfig, jobs: int = 1):
    """
    Execute the configured mode and return the written table paths.

    Raises
    ------
    OSError
        When an output cannot be written.
    """
    started = time.perf_counter()
    Path(config.out_dir).mkdir(parents=True, exist_ok=True)
    logger.info("mode: %s | n_cut: %d | l_max: %d | jobs: %d", config.mode, config.n_cut, config.l_max, jobs)
    return RUNNERS[config.mode](config, jobs, started)


# --------------------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gaussian_bec",
        description="Gaussian-state ground states, collective modes and expansion of a trapped Bose gas.",
    )
    parser.add_argument("--config", required=True, help="run configuration file")
    parser.add_argument("--mode", choices=MODES, help="override the configured mode")
    parser.add_argument("--jobs", type=int, default=1, help="worker threads for points and sectors")
    parser.add_argument("--seed", type=int, help="override the RNG seed")
    parser.add_argument("--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as error:
        logger.error("cannot read config: %s", error)
        return EXIT_IO

    try:
        config = parse_config(text, mode=args.mode, seed=args.seed)
    except ConfigError as error:
        logger.error("config error: %s", error)
        return EXIT_CONFIG
    if args.jobs < 1:
        logger.error("config error: --jobs must be at least 1")
        return EXIT_CONFIG

    try:
        paths = run(config, args.jobs)
    except OSError as error:
        logger.error("I/O error: %s", error)
        return EXIT_IO
    for path in paths:
        logger.info("written: %s", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
