"""Scenario config validation, artifact writers, and the purification builder."""

import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from ionlab import __version__
from ionlab.dynamics.scenario import (
    build_purification_scenario,
    load_scenario,
    resolve_scenario,
    run_scenario,
    save_scenario,
    summary_dict,
    write_summary_json,
    write_trajectory_csv,
)

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def mini_cfg():
    return {
        "trap": {"mode": "pseudo", "omega_z_rad_s": 2 * math.pi * 50e3},
        "ions": [{"species": "138Ba", "count": 2, "temperature_k": 0.001}],
        "beams": [
            {"direction": [0, 0, 1], "line": [138, "b"],
             "detuning_mhz": -8.0, "saturation": 0.5},
            {"direction": [0, 0, -1], "line": [138, "b"],
             "detuning_mhz": -8.0, "saturation": 0.5},
        ],
        "dt_s": 5e-9,
        "steps": 20000,
        "seed": 12,
    }


# ----------------------------------------------------------- resolution -----


def test_resolve_fills_defaults():
    cfg = {"ions": [{"species": "138Ba", "count": 2}],
           "dt_s": 1e-7, "steps": 100, "seed": 3}
    trap, ions, beams, params, resolved = resolve_scenario(cfg)
    assert trap.mode == "full_rf" and trap.r0_m == 3e-3
    assert len(ions) == 2 and beams == []
    assert params["execution"] == "reference"
    assert params["sample_every"] == 1  # 100 steps never rounds to zero samples
    assert resolved["version"] == __version__
    assert resolved["ions"][0]["temperature_k"] == 0.005
    assert resolved["ions"][0]["placement"] == "fill"
    assert resolved["z_max_m"] > 0


def test_resolve_rejects_unknown_keys_everywhere():
    base = mini_cfg()
    bad_top = dict(base, rf_power=3)
    with pytest.raises(ValueError, match="unknown scenario keys.*rf_power"):
        resolve_scenario(bad_top)
    bad_trap = dict(base, trap={"radius_m": 1e-3})
    with pytest.raises(ValueError, match="unknown trap keys.*radius_m"):
        resolve_scenario(bad_trap)
    bad_ion = dict(base, ions=[{"species": "138Ba", "count": 1, "n": 2}])
    with pytest.raises(ValueError, match="unknown ion entry keys.*'n'"):
        resolve_scenario(bad_ion)
    bad_beam = dict(base)
    bad_beam["beams"] = [{"direction": [0, 0, 1], "line": [138, "b"],
                          "detuning_mhz": 0.0, "saturation": 0.1, "power_mw": 5}]
    with pytest.raises(ValueError, match="unknown beam keys.*power_mw"):
        resolve_scenario(bad_beam)


def test_resolve_requires_core_keys():
    for missing in ("ions", "dt_s", "steps", "seed"):
        cfg = mini_cfg()
        del cfg[missing]
        with pytest.raises(ValueError, match=f"missing required key '{missing}'"):
            resolve_scenario(cfg)


def test_resolve_rejects_bad_entries():
    cfg = mini_cfg()
    cfg["ions"] = [{"species": "140Ba", "count": 1}]
    with pytest.raises(ValueError):
        resolve_scenario(cfg)
    cfg["ions"] = [{"species": "argon", "count": 1}]
    with pytest.raises(ValueError, match="species"):
        resolve_scenario(cfg)
    cfg["ions"] = [{"species": "138Ba", "count": 0}]
    with pytest.raises(ValueError, match="count"):
        resolve_scenario(cfg)
    cfg["ions"] = [{"species": "138Ba", "count": 1, "placement": "edge"}]
    with pytest.raises(ValueError, match="placement"):
        resolve_scenario(cfg)
    cfg = mini_cfg()
    cfg["beams"] = [{"direction": [0, 0, 1], "line": [138],
                     "detuning_mhz": 0.0, "saturation": 0.1}]
    with pytest.raises(ValueError, match="line must be"):
        resolve_scenario(cfg)
    cfg["beams"] = [{"direction": [0, 0, 1], "line": [133, "b"],
                     "detuning_mhz": 0.0, "saturation": 0.1}]
    with pytest.raises(ValueError, match="required"):
        resolve_scenario(cfg)  # odd isotope needs the F quantum numbers


def test_center_placement_takes_innermost_site():
    cfg = {"trap": {"mode": "pseudo"},
           "ions": [{"species": "133Ba", "count": 1, "placement": "center"},
                    {"species": "132Ba", "count": 2}],
           "dt_s": 1e-7, "steps": 10, "seed": 0}
    _, ions, _, _, _ = resolve_scenario(cfg)
    assert ions[0].species == "133Ba"
    assert abs(ions[0].position[2]) < 1e-12  # middle of a 3-ion chain
    assert all(abs(ion.position[2]) > 1e-6 for ion in ions[1:])


def test_save_load_roundtrip(tmp_path):
    cfg = mini_cfg()
    path = tmp_path / "scan.json"
    save_scenario(path, cfg)
    assert load_scenario(path) == cfg


# ------------------------------------------------------ runs + artifacts ----


def test_rerun_from_resolved_config_is_bit_identical(tmp_path):
    res1, resolved1 = run_scenario(mini_cfg())
    res2, resolved2 = run_scenario(resolved1)
    assert resolved2 == resolved1
    assert np.array_equal(res1.positions, res2.positions)
    assert np.array_equal(res1.final_velocities, res2.final_velocities)
    assert np.array_equal(res1.scatter_counts, res2.scatter_counts)
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    write_summary_json(p1, res1, resolved1)
    write_summary_json(p2, res2, resolved2)
    assert p1.read_bytes() == p2.read_bytes()


def test_trajectory_csv_layout(tmp_path):
    res, _ = run_scenario(mini_cfg())
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, res)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t_s", "ion", "species", "x_m", "y_m", "z_m",
                       "vx_m_s", "vy_m_s", "vz_m_s", "alive"]
    n_samples = res.sample_times_s.size
    assert len(rows) == 1 + n_samples * 2
    assert rows[1][2] == "138Ba"
    assert set(r[9] for r in rows[1:]) <= {"0", "1"}
    assert float(rows[1][0]) == pytest.approx(res.sample_times_s[0])


def test_summary_contents_and_decimation():
    res, resolved = run_scenario(mini_cfg())
    s = summary_dict(res, resolved)
    assert s["version"] == __version__
    assert s["resolved_config"] == resolved
    ret = s["retention"]["138Ba"]
    assert ret["loaded"] == 2
    assert ret["retained"] + ret["ejected"] == 2
    assert len(s["scatter_counts"]) == 2
    assert set(s["ejection_times_s"]) == {"0", "1"}
    full_len = len(s["temperature_series"]["times_s"])
    small = summary_dict(res, resolved, max_temperature_points=5)
    assert small["temperature_series"]["stride"] > 1
    assert len(small["temperature_series"]["times_s"]) <= 6
    assert len(small["temperature_series"]["138Ba"]) == \
        len(small["temperature_series"]["times_s"]) < full_len
    json.dumps(s)  # every value must be JSON-serializable


# ------------------------------------------------- purification scenarios ---


def test_purification_builder_structure():
    cfg = build_purification_scenario()
    assert cfg["trap"]["omega_z_rad_s"] == pytest.approx(2 * math.pi * 5e3)
    assert cfg["ions"][0] == {"species": "133Ba", "count": 1,
                              "temperature_k": 0.005, "placement": "center"}
    assert cfg["ions"][1]["species"] == "132Ba"
    assert cfg["ions"][1]["count"] == 19
    cool = [b for b in cfg["beams"] if b["detuning_mhz"] < 0]
    heat = [b for b in cfg["beams"] if b["detuning_mhz"] > 0]
    assert len(cool) == 8 and len(heat) == 4
    assert all(b["line"][0] == 133 for b in cool)
    assert all(b["line"][0] == 132 for b in heat)
    assert cfg["steps"] == round(0.015 / 3.0e-9)
    trap, ions, beams, params, resolved = resolve_scenario(cfg)
    assert len(ions) == 20
    # target occupies the innermost chain site
    z = np.array([ion.position[2] for ion in ions])
    assert ions[int(np.argmin(np.abs(z)))].species == "133Ba"


def test_shipped_purification_scenario_matches_builder():
    shipped = load_scenario(SCENARIOS / "purification_20.json")
    assert shipped == build_purification_scenario(n_contaminants=19, seed=1)


def test_shipped_500_ion_scenario_is_wellformed():
    cfg = load_scenario(SCENARIOS / "purification_500.json")
    assert sum(entry["count"] for entry in cfg["ions"]) == 500
    assert cfg["label"] == "purification_500_extended"
    assert cfg["steps"] * cfg["dt_s"] == pytest.approx(0.05)
    trap, ions, beams, params, resolved = resolve_scenario(cfg)
    assert len(ions) == 500 and len(beams) == 12


def test_purification_smoke_run():
    cfg = build_purification_scenario(n_contaminants=5, seed=3, duration_s=0.01)
    res, resolved = run_scenario(cfg)
    assert res.retained("133Ba")
    assert res.ejected_count("132Ba") == 5
    times = [t for t in res.ejection_times_s if np.isfinite(t)]
    assert len(times) == 5 and max(times) < 0.01
