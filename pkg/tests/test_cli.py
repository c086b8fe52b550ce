import json

import pandas as pd
import pytest

from gaussian_bec import cli
from gaussian_bec.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    SWEEP_COLUMNS,
    RunConfig,
    main,
    parse_config,
    parse_range,
    validate,
)
from gaussian_bec.errors import CollapseError, ConfigError, DivergenceError, NoSqueezedModeError
from gaussian_bec.fluct import SPECTRUM_COLUMNS
from gaussian_bec.results import read_table


TINY_GROUND = """
# two points on a small basis
[physics]
mode = ground
N = 20
na_s = 0.1, -0.05

[basis]
n_cut = 3
l_max = 1

[output]
out_dir = {out}
"""


# --------------------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------------------


def test_minimal_config_defaults():
    config = parse_config("N = 100\nna_s = 0.05\n")
    assert config.mode == "ground"
    assert config.n_cut == 20 and config.l_max == 4
    assert config.u_mult == 3.0
    assert config.seed == 42
    assert config.format == "csv"
    assert config.solver_config(0.05).a_s == pytest.approx(0.0005)


def test_inclusive_range():
    values = parse_range("-0.15:-0.01:0.01")
    assert len(values) == 15
    assert values[0] == -0.15 and values[-1] == -0.01
    assert len(parse_range("-0.4:0.3:0.05")) == 15


def test_range_and_list_forms():
    assert parse_range("0.1") == (0.1,)
    assert parse_range("0, 1, 3") == (0.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        parse_range("1:0:0.1")
    with pytest.raises(ValueError):
        parse_range("0:1")


def test_malformed_line_reports_line_number():
    with pytest.raises(ConfigError) as info:
        parse_config("N = 10\nna_s = 0.1\n[basis]\nncut==\n")
    assert info.value.line == 4


def test_unknown_key():
    with pytest.raises(ConfigError) as info:
        parse_config("N = 10\nna_s = 0.1\ncolour = blue\n")
    assert info.value.key == "colour"


def test_unknown_section():
    with pytest.raises(ConfigError):
        parse_config("[plots]\nN = 10\n")


def test_bad_integer():
    with pytest.raises(ConfigError) as info:
        parse_config("N = 10\nna_s = 0.1\n[basis]\nn_cut = 2.5\n")
    assert info.value.key == "n_cut"
    assert info.value.line == 4


def test_solver_section_and_alias():
    config = parse_config("N = 10\nna_s = 0.1\n[solver]\nseed_mode = vacuum+noise\nseed = 7\ndtau = 0.02\n")
    solver = config.solver_config(0.1)
    assert solver.seed_mode == "noisy"
    assert solver.seed == 7
    assert solver.dtau == 0.02


@pytest.mark.parametrize("text", [
    "na_s = 0.1\n",
    "N = -5\nna_s = 0.1\n",
    "N = 10\n",
    "N = 10\nna_s = 0.1\nu_mult = 2\n",
    "mode = tof\nN = 10\nT = -1, 2\n",
    "mode = spectrum\nN = 10\nna_s = 0.1\nL = 0, 7\n",
    "N = 10\nna_s = 0.1\n[basis]\nn_cut = 0\n",
    "N = 10\nna_s = 0.1\n[solver]\ntol_eta = 0\n",
])
def test_invalid_combinations(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_threshold_mode_needs_no_particle_number():
    validate(RunConfig(mode="threshold"))


# --------------------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------------------


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "absent.ini")]) == EXIT_IO


def test_bad_config_file(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("N = ten\n", encoding="utf-8")
    assert main(["--config", str(path)]) == EXIT_CONFIG


def test_bad_jobs(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("mode = tof\nN = 10\n", encoding="utf-8")
    assert main(["--config", str(path), "--jobs", "0"]) == EXIT_CONFIG


def test_tof_run_writes_table_and_sidecar(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "tof.ini"
    path.write_text(f"mode = tof\nN = 100\nT = 0, 1, 3\n[output]\nout_dir = {out}\n", encoding="utf-8")
    assert main(["--config", str(path)]) == EXIT_OK

    table_path = out / "tof.csv"
    assert ";" in table_path.read_text(encoding="utf-8").splitlines()[0]
    table = read_table(table_path)
    assert list(table.columns) == ["T", "width", "g2"]
    assert table["g2"].tolist() == pytest.approx([3.01] * 3)

    meta = json.loads((out / "tof.csv.json").read_text(encoding="utf-8"))
    assert meta["file"] == "tof.csv"
    assert meta["seed"] == 42
    assert meta["config"]["mode"] == "tof"
    assert "timestamp_utc" in meta


def test_mode_and_seed_overrides(tmp_path):
    out = tmp_path / "out"
    path = tmp_path / "run.ini"
    path.write_text(f"mode = ground\nN = 10\n[output]\nout_dir = {out}\nformat = json\n", encoding="utf-8")
    assert main(["--config", str(path), "--mode", "tof", "--seed", "11"]) == EXIT_OK
    meta = json.loads((out / "tof.json.json").read_text(encoding="utf-8"))
    assert meta["seed"] == 11
    assert len(pd.read_json(out / "tof.json", orient="records")) == 3


def test_ground_runs_are_reproducible(tmp_path):
    tables = []
    for run in ("first", "second"):
        out = tmp_path / run
        path = tmp_path / f"{run}.ini"
        path.write_text(TINY_GROUND.format(out=out), encoding="utf-8")
        assert main(["--config", str(path), "--jobs", "2"]) == EXIT_OK
        tables.append((out / "ground.csv").read_bytes())
        assert (out / "ground_state_0.json").exists()
    assert tables[0] == tables[1]
    table = read_table(tmp_path / "first" / "ground.csv")
    assert list(table["a_s_over_aho_times_N"]) == [0.1, -0.05]


TINY_RUN = """
[physics]
mode = {mode}
N = 20
na_s = {na_s}
L = 0, 1

[basis]
n_cut = 3
l_max = 1

[solver]
max_steps = 400

[output]
out_dir = {out}
"""


def _write_run(tmp_path, mode, na_s="0.05"):
    out = tmp_path / mode
    path = tmp_path / f"{mode}.ini"
    path.write_text(TINY_RUN.format(mode=mode, na_s=na_s, out=out), encoding="utf-8")
    return path, out


def test_sweep_run_writes_sweep_and_scan_tables(tmp_path):
    path, out = _write_run(tmp_path, "sweep", na_s="0.05:-0.05:-0.05")
    assert main(["--config", str(path), "--jobs", "2"]) == EXIT_OK
    sweep = read_table(out / "sweep.csv")
    assert list(sweep.columns) == SWEEP_COLUMNS
    assert list(sweep["a_s_over_aho_times_N"]) == [0.05, 0.0, -0.05]
    assert sweep["condensate_fraction"].between(0.0, 1.0).all()
    scan = read_table(out / "scan.csv")
    assert sorted(scan["u_mult"].unique()) == [1.0, 3.0]
    assert len(scan) == 6
    assert (out / "sweep.csv.json").exists() and (out / "scan.csv.json").exists()


def test_spectrum_run_writes_modes_per_sector(tmp_path):
    path, out = _write_run(tmp_path, "spectrum")
    assert main(["--config", str(path)]) == EXIT_OK
    table = read_table(out / "spectrum.csv")
    assert list(table.columns) == SPECTRUM_COLUMNS
    assert set(table["L"]) == {0, 1}
    assert list(table["L"]) == sorted(table["L"])
    assert (table["a_s_over_aho_times_N"] == 0.05).all()
    meta = json.loads((out / "spectrum.csv.json").read_text(encoding="utf-8"))
    assert meta["skipped_points"] == []


def test_threshold_run_reports_both_multipliers(tmp_path):
    out = tmp_path / "threshold"
    path = tmp_path / "threshold.ini"
    path.write_text(f"mode = threshold\n[basis]\nn_cut = 4\nl_max = 0\n[output]\nout_dir = {out}\n",
                    encoding="utf-8")
    assert main(["--config", str(path)]) == EXIT_OK
    table = read_table(out / "threshold.csv")
    assert list(table["u_mult"]) == [1, 3]
    k1, k3 = table["k_c"]
    assert k3 > 0.0
    assert k1 == pytest.approx(3.0 * k3, abs=3e-3)


@pytest.mark.parametrize("error, phase, collapsed", [
    (DivergenceError("runaway", step=7), "failed", False),
    (CollapseError("collapse", step=7), "collapsed", True),
    (NoSqueezedModeError("empty cloud"), "failed", False),
])
def test_failed_points_are_recorded(tmp_path, monkeypatch, error, phase, collapsed):
    solve = cli.solve_ground

    def failing(config, tensors):
        if config.a_s < 0:
            raise error
        return solve(config, tensors)

    monkeypatch.setattr(cli, "solve_ground", failing)
    path, out = _write_run(tmp_path, "ground", na_s="0.05, -0.05")
    assert main(["--config", str(path)]) == EXIT_OK
    table = read_table(out / "ground.csv")
    assert list(table["phase"])[1] == phase
    assert bool(table["collapsed"][1]) is collapsed
    assert not bool(table["converged"][1])
    assert (out / "ground_state_0.json").exists()
    assert not (out / "ground_state_1.json").exists()
