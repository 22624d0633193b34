"""End-to-end tests of the command-line interface and its exit-code contract."""

import json
import math

import numpy as np
import pytest

from ionlab import __version__, lineshape, sidebands
from ionlab.cli import main


def run_cli(argv):
    """Invoke main() and normalize SystemExit into a return code."""
    try:
        rc = main(argv)
    except SystemExit as exc:
        rc = exc.code
    return 0 if rc is None else rc


@pytest.fixture
def mini_scenario(tmp_path):
    cfg = {
        "trap": {"mode": "pseudo", "omega_z_rad_s": 2 * math.pi * 50e3},
        "ions": [{"species": "138Ba", "count": 2, "temperature_k": 0.001}],
        "beams": [
            {"direction": [0, 0, 1], "line": [138, "b"],
             "detuning_mhz": -8.0, "saturation": 0.5},
            {"direction": [0, 0, -1], "line": [138, "b"],
             "detuning_mhz": -8.0, "saturation": 0.5},
        ],
        "dt_s": 5e-9, "steps": 20000, "seed": 12, "label": "mini",
    }
    path = tmp_path / "mini.json"
    path.write_text(json.dumps(cfg))
    return path


# ---------------------------------------------------------------- tables ----


def test_lines_single_even_isotope(capsys):
    assert run_cli(["lines", "--isotope", "136"]) == 0
    out = capsys.readouterr().out
    assert "179.4000" in out
    assert "68.0000" in out
    assert out.count("MHz") == 2  # spin-0: one line per branch


def test_levels_artifact_carries_config_and_version(tmp_path, capsys):
    art = tmp_path / "levels.json"
    assert run_cli(["levels", "--isotope", "133", "--term", "S1/2",
                    "-o", str(art)]) == 0
    data = json.loads(art.read_text())
    assert data["version"] == __version__
    assert data["config"] == {"command": "levels", "isotope": 133,
                              "terms": ["S1/2"]}
    by_f = {lev["f"]: lev["energy_mhz"] for lev in data["levels"]}
    assert by_f[0.0] - by_f[1.0] == pytest.approx(9925.45, abs=0.01)


def test_levels_unknown_isotope_is_domain_error(capsys):
    assert run_cli(["levels", "--isotope", "131"]) == 1
    assert "131" in capsys.readouterr().err


def test_usage_errors_exit_2(capsys):
    assert run_cli(["levels"]) == 2                     # missing required flag
    assert run_cli(["sim", "--frobnicate"]) == 2        # unknown flag
    assert run_cli([]) == 2                             # no subcommand


# ------------------------------------------------------------------ plan ----


@pytest.fixture
def plan_file(tmp_path):
    path = tmp_path / "plan.json"
    sidebands.save_plan(path, sidebands.purification_plan())
    return path


def test_plan_valid_scheme(plan_file, tmp_path, capsys):
    art = tmp_path / "report.json"
    assert run_cli(["plan", str(plan_file), "-o", str(art)]) == 0
    out = capsys.readouterr().out
    assert "VALID" in out
    data = json.loads(art.read_text())
    assert data["version"] == __version__
    assert data["config"]["carrier_shift_mhz"] == 0.0
    assert data["report"]["valid"] is True


def test_plan_strict_flags_broken_scheme(plan_file, capsys):
    # shifting every carrier far blue turns the cooling tones into heaters
    assert run_cli(["plan", str(plan_file), "--strict",
                    "--carrier-shift-mhz", "300"]) == 1
    assert "heated" in capsys.readouterr().err


def test_plan_malformed_json_reports_position(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"target": 133,\n  "entries": [}\n')
    assert run_cli(["plan", str(bad)]) == 2
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_plan_wrong_schema_exits_2(tmp_path, capsys):
    shapeless = tmp_path / "shapeless.json"
    shapeless.write_text('{"foo": 1}')
    assert run_cli(["plan", str(shapeless)]) == 2


# ------------------------------------------------------------------ king ----


def test_king_reports_both_fits(tmp_path, capsys):
    art = tmp_path / "king.json"
    assert run_cli(["king", "-o", str(art)]) == 0
    out = capsys.readouterr().out
    assert "fit_all_rows" in out and "fit_prior_rows" in out
    data = json.loads(art.read_text())
    assert data["fits"]["fit_prior_rows"]["slope"] == pytest.approx(-0.26320, abs=5e-5)
    assert data["fits"]["fit_all_rows"]["slope"] == pytest.approx(-0.28198, abs=5e-5)
    assert data["inversion"]["d_r2_fm2"] == pytest.approx(-0.104, abs=0.02)
    assert data["config"]["pair"] == [133, 138]


def test_king_custom_subset(capsys):
    assert run_cli(["king", "--include", "134", "135", "136", "137"]) == 0
    out = capsys.readouterr().out
    assert "fit:" in out and "fit_all_rows" not in out


# ------------------------------------------------------------------- fit ----


def test_fit_recovers_center(tmp_path, capsys):
    grid = np.arange(737.0, 1137.0 + 1e-9, 5.0)
    scan = lineshape.synth_scan(937.0, 40.0, -80.0, 120.0, grid,
                                noise_sigma=8.0, seed=4)
    path = tmp_path / "scan.csv"
    lineshape.write_scan_csv(path, scan)
    art = tmp_path / "fit.json"
    assert run_cli(["fit", str(path), "--systematic-mhz", "20",
                    "-o", str(art)]) == 0
    data = json.loads(art.read_text())
    assert data["fit"]["center_mhz"] == pytest.approx(937.0, abs=4.0)
    assert data["fit"]["systematic_mhz"] == 20.0
    assert "systematic" in capsys.readouterr().out


def test_fit_malformed_csv_reports_line(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("frequency_mhz,counts\n1,2\nthree,4\n")
    assert run_cli(["fit", str(bad)]) == 2
    assert "line 3" in capsys.readouterr().err


def test_fit_missing_file_exits_2(tmp_path, capsys):
    assert run_cli(["fit", str(tmp_path / "nope.csv")]) == 2


# ------------------------------------------------------------------- sim ----


def test_sim_writes_artifacts(mini_scenario, tmp_path, capsys):
    outdir = tmp_path / "run"
    assert run_cli(["sim", str(mini_scenario), "--outdir", str(outdir)]) == 0
    out = capsys.readouterr().out
    assert "138Ba: 2/2 retained" in out
    summary = json.loads((outdir / "mini_summary.json").read_text())
    assert summary["version"] == __version__
    assert summary["resolved_config"]["seed"] == 12
    assert (outdir / "mini_trajectory.csv").exists()


def test_sim_rerun_from_emitted_config_is_bit_identical(mini_scenario, tmp_path):
    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    assert run_cli(["sim", str(mini_scenario), "--outdir", str(out1)]) == 0
    emitted = json.loads((out1 / "mini_summary.json").read_text())["resolved_config"]
    replay = tmp_path / "replay.json"
    replay.write_text(json.dumps(emitted))
    assert run_cli(["sim", str(replay), "--outdir", str(out2),
                    "--prefix", "mini"]) == 0
    assert (out1 / "mini_summary.json").read_bytes() == \
        (out2 / "mini_summary.json").read_bytes()
    assert (out1 / "mini_trajectory.csv").read_bytes() == \
        (out2 / "mini_trajectory.csv").read_bytes()


def test_sim_overrides(mini_scenario, tmp_path):
    outdir = tmp_path / "o"
    assert run_cli(["sim", str(mini_scenario), "--outdir", str(outdir),
                    "--set", "steps=4000", "--set", "trap.mode=pseudo",
                    "--seed", "77"]) == 0
    summary = json.loads((outdir / "mini_summary.json").read_text())
    assert summary["resolved_config"]["steps"] == 4000
    assert summary["resolved_config"]["seed"] == 77


def test_sim_seed_changes_output(mini_scenario, tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_cli(["sim", str(mini_scenario), "--outdir", str(a)])
    run_cli(["sim", str(mini_scenario), "--outdir", str(b), "--seed", "99"])
    assert (a / "mini_summary.json").read_bytes() != \
        (b / "mini_summary.json").read_bytes()


def test_sim_unknown_scenario_key_exits_2(mini_scenario, tmp_path, capsys):
    assert run_cli(["sim", str(mini_scenario), "--outdir", str(tmp_path),
                    "--set", "rf_power=3"]) == 2
    assert "rf_power" in capsys.readouterr().err
    assert run_cli(["sim", str(mini_scenario), "--set", "steps"]) == 2


def test_sim_physics_rejection_is_domain_error(mini_scenario, tmp_path, capsys):
    # dt far beyond the integration bound: config parses, physics says no
    assert run_cli(["sim", str(mini_scenario), "--outdir", str(tmp_path),
                    "--set", "dt_s=1e-7"]) == 1
    assert "reduce dt" in capsys.readouterr().err


def test_sim_execution_override(mini_scenario, tmp_path):
    outdir = tmp_path / "p"
    assert run_cli(["sim", str(mini_scenario), "--outdir", str(outdir),
                    "--execution", "parallel"]) == 0
    summary = json.loads((outdir / "mini_summary.json").read_text())
    assert summary["resolved_config"]["execution"] == "parallel"


# ------------------------------------------------------------- data dir -----


def test_relative_outputs_land_in_data_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("IONLAB_DATA_DIR", str(tmp_path))
    assert run_cli(["levels", "--isotope", "136", "-o", "art.json"]) == 0
    assert (tmp_path / "art.json").exists()


def test_sim_outdir_respects_data_dir(mini_scenario, tmp_path, monkeypatch):
    monkeypatch.setenv("IONLAB_DATA_DIR", str(tmp_path))
    assert run_cli(["sim", str(mini_scenario), "--outdir", "runs"]) == 0
    assert (tmp_path / "runs" / "mini_summary.json").exists()
