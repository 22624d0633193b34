"""Scenario files: JSON in, trajectory CSV and summary JSON out.

A scenario fully determines a run.  ``resolve_scenario`` fills every default
and computes derived quantities (ejection boundary, sampling stride), and the
resolved block is echoed into the summary artifact so any run can be
reproduced bit-for-bit from its own output in reference execution mode.
Wall-clock timing never enters the artifacts.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from scipy.constants import atomic_mass

from .. import __version__
from ..spectra import isotope
from .bodies import ba_ion, chain_equilibrium, thermal_velocities
from .engine import REFERENCE, default_z_max, run_simulation
from .scatter import DEFAULT_LINEWIDTH_MHZ, beam_for_line
from .trap import FULL_RF, TrapConfig

_TRAP_KEYS = {"r0_m", "v0_volt", "omega_rad_s", "omega_z_rad_s", "mode", "reference_amu"}
_ION_KEYS = {"species", "count", "temperature_k", "placement"}
_BEAM_KEYS = {"direction", "line", "detuning_mhz", "saturation", "linewidth_mhz", "targets"}
_TOP_KEYS = {"version", "trap", "ions", "beams", "dt_s", "steps", "seed",
             "sample_every", "execution", "z_max_m", "label"}

_TRAP_DEFAULTS = {"r0_m": 3.0e-3, "v0_volt": 100.0,
                  "omega_rad_s": 2 * math.pi * 1.0e6,
                  "omega_z_rad_s": 2 * math.pi * 20.0e3,
                  "mode": FULL_RF, "reference_amu": 138.0}


def _reject_unknown(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise ValueError(f"unknown {where} keys: {sorted(unknown)}; "
                         f"allowed: {sorted(allowed)}")


def _species_mass_amu(label):
    digits = "".join(ch for ch in label if ch.isdigit())
    if not digits or not label.endswith("Ba"):
        raise ValueError(f"cannot parse species label {label!r}; expected like '133Ba'")
    a = int(digits)
    isotope(a)  # raises for isotopes outside the registry
    return a


def load_scenario(path):
    with open(path) as fh:
        return json.load(fh)


def save_scenario(path, cfg):
    with open(path, "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resolve_scenario(cfg):
    """Validate a scenario dict and return (trap, ions, beams, params, resolved).

    ``resolved`` is a scenario dict with every default and derived value made
    explicit; feeding it back reproduces the run exactly.
    """
    _reject_unknown(cfg, _TOP_KEYS, "scenario")
    for key in ("ions", "dt_s", "steps", "seed"):
        if key not in cfg:
            raise ValueError(f"scenario is missing required key {key!r}")

    trap_cfg = dict(_TRAP_DEFAULTS)
    user_trap = cfg.get("trap", {})
    _reject_unknown(user_trap, _TRAP_KEYS, "trap")
    trap_cfg.update(user_trap)
    trap = TrapConfig(r0_m=trap_cfg["r0_m"], v0_volt=trap_cfg["v0_volt"],
                      omega_rad_s=trap_cfg["omega_rad_s"],
                      omega_z_rad_s=trap_cfg["omega_z_rad_s"],
                      mode=trap_cfg["mode"], reference_amu=trap_cfg["reference_amu"])

    entries = []
    n_total = 0
    for raw in cfg["ions"]:
        _reject_unknown(raw, _ION_KEYS, "ion entry")
        if "species" not in raw or "count" not in raw:
            raise ValueError(f"ion entry needs species and count: {raw}")
        entry = {"species": raw["species"], "count": int(raw["count"]),
                 "temperature_k": float(raw.get("temperature_k", 0.005)),
                 "placement": raw.get("placement", "fill")}
        if entry["count"] < 1:
            raise ValueError(f"ion count must be >= 1: {raw}")
        if entry["placement"] not in ("fill", "center"):
            raise ValueError(f"placement must be 'fill' or 'center': {raw}")
        _species_mass_amu(entry["species"])
        entries.append(entry)
        n_total += entry["count"]

    # cold-chain sites; 'center' entries claim the innermost ones first
    sites = chain_equilibrium(n_total, trap.axial_curvature)
    by_center = sorted(range(n_total), key=lambda i: (abs(sites[i]), sites[i]))
    taken = []
    for entry in entries:
        if entry["placement"] == "center":
            idx = [i for i in by_center if i not in taken][: entry["count"]]
            taken.extend(idx)
            entry["_sites"] = sorted(idx)
    pool = [i for i in range(n_total) if i not in taken]
    for entry in entries:
        if entry["placement"] == "fill":
            entry["_sites"] = pool[: entry["count"]]
            pool = pool[entry["count"]:]

    seed = int(cfg["seed"])
    rng = np.random.default_rng(seed)
    ions = []
    for entry in entries:
        a = _species_mass_amu(entry["species"])
        masses = np.full(entry["count"], a * atomic_mass)
        vels = thermal_velocities(masses, entry["temperature_k"], rng)
        for k, site in enumerate(entry["_sites"]):
            ions.append(ba_ion(a, position=(0.0, 0.0, sites[site]), velocity=vels[k]))
        del entry["_sites"]

    beams = []
    beam_cfgs = []
    for raw in cfg.get("beams", []):
        _reject_unknown(raw, _BEAM_KEYS, "beam")
        for key in ("direction", "line", "detuning_mhz", "saturation"):
            if key not in raw:
                raise ValueError(f"beam needs {key!r}: {raw}")
        line = raw["line"]
        if len(line) not in (2, 4):
            raise ValueError(f"beam line must be [A, branch] or [A, branch, F_lower, F_upper]: {line}")
        f_lo, f_hi = (line[2], line[3]) if len(line) == 4 else (None, None)
        beam = beam_for_line(int(line[0]), line[1], f_lo, f_hi,
                             direction=raw["direction"],
                             detuning_mhz=float(raw["detuning_mhz"]),
                             saturation=float(raw["saturation"]),
                             linewidth_mhz=float(raw.get("linewidth_mhz", DEFAULT_LINEWIDTH_MHZ)),
                             targets=raw.get("targets"))
        beams.append(beam)
        beam_cfgs.append({"direction": [float(x) for x in beam.direction],
                          "line": list(line), "detuning_mhz": beam.detuning_mhz,
                          "saturation": beam.saturation,
                          "linewidth_mhz": beam.linewidth_mhz,
                          "targets": beam.targets})

    z_max = cfg.get("z_max_m")
    if z_max is None:
        z_max = default_z_max(trap, n_total)
    steps = int(cfg["steps"])
    sample_every = cfg.get("sample_every")
    if sample_every is None:
        sample_every = max(1, steps // 2000)
    params = {"dt_s": float(cfg["dt_s"]), "steps": steps, "seed": seed,
              "sample_every": int(sample_every),
              "execution": cfg.get("execution", REFERENCE),
              "z_max_m": float(z_max), "label": cfg.get("label", "")}

    resolved = {
        "version": __version__,
        "label": params["label"],
        "trap": trap_cfg,
        "ions": entries,
        "beams": beam_cfgs,
        "dt_s": params["dt_s"], "steps": steps, "seed": seed,
        "sample_every": params["sample_every"],
        "execution": params["execution"],
        "z_max_m": params["z_max_m"],
    }
    return trap, ions, beams, params, resolved


def run_scenario(cfg, execution=None):
    """Run a scenario dict (or path); returns (SimResult, resolved_config)."""
    if isinstance(cfg, (str, bytes)) or hasattr(cfg, "__fspath__"):
        cfg = load_scenario(cfg)
    trap, ions, beams, params, resolved = resolve_scenario(cfg)
    if execution is not None:
        params["execution"] = execution
        resolved["execution"] = execution
    result = run_simulation(trap, ions, beams, params["dt_s"], params["steps"],
                            params["seed"], sample_every=params["sample_every"],
                            execution=params["execution"], z_max=params["z_max_m"])
    return result, resolved


def write_trajectory_csv(path, result):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "ion", "species", "x_m", "y_m", "z_m",
                         "vx_m_s", "vy_m_s", "vz_m_s", "alive"])
        for si, t in enumerate(result.sample_times_s):
            for i, label in enumerate(result.species):
                p = result.positions[si, i]
                v = result.velocities[si, i]
                writer.writerow([format(t, ".12g"), i, label,
                                 format(p[0], ".12g"), format(p[1], ".12g"),
                                 format(p[2], ".12g"), format(v[0], ".12g"),
                                 format(v[1], ".12g"), format(v[2], ".12g"),
                                 int(result.alive_samples[si, i])])


def summary_dict(result, resolved, max_temperature_points=2000):
    """JSON-ready run summary.  Deterministic; no wall-clock metrics."""
    retention = {}
    for label in result.species_order:
        sel = [i for i, s in enumerate(result.species) if s == label]
        kept = int(sum(result.final_alive[i] for i in sel))
        retention[label] = {"loaded": len(sel), "retained": kept,
                            "ejected": len(sel) - kept,
                            "all_retained": kept == len(sel),
                            "all_ejected": kept == 0}
    eject = {str(i): (None if not np.isfinite(t) else float(t))
             for i, t in enumerate(result.ejection_times_s)}
    n_t = result.temperature_times_s.size
    stride = max(1, int(math.ceil(n_t / max_temperature_points)))
    temp = {"stride": stride,
            "times_s": [float(t) for t in result.temperature_times_s[::stride]]}
    for label in result.species_order:
        _, series = result.temperature_series(label)
        temp[label] = [None if not np.isfinite(v) else float(v)
                       for v in series[::stride]]
    return {
        "version": __version__,
        "resolved_config": resolved,
        "retention": retention,
        "ejection_times_s": eject,
        "scatter_counts": [int(c) for c in result.scatter_counts],
        "clamp_events": int(result.clamp_events),
        "temperature_series": temp,
    }


def write_summary_json(path, result, resolved):
    with open(path, "w") as fh:
        json.dump(summary_dict(result, resolved), fh, indent=2, sort_keys=True)
        fh.write("\n")


def build_purification_scenario(n_contaminants=19, seed=1, duration_s=0.015,
                                dt_s=3.0e-9, omega_z_hz=5.0e3, label=""):
    """Isotope purification: one cooled target, a shell of heated neighbors.

    The target sits at the chain center under red-detuned 45-degree beam
    pairs at two depths (a near tier for everyday cooling, a far tier that
    recaptures collision-kicked motion).  Contaminants see blue-detuned axial
    pairs at two tiers: near-resonant anti-damping gets slow ions moving and
    a far-blue band stays resonant at transit speeds, so the push keeps
    working right up to the escape velocity.  Durations and detunings are
    documented guesses (the underlying process is not published in this
    detail) chosen so ejection completes well inside ``duration_s``.
    """
    steps = int(round(duration_s / dt_s))
    cool_dirs = [(s / math.sqrt(2.0), 0.0, s / math.sqrt(2.0)) for s in (1.0, -1.0)]
    cool_dirs += [(0.0, s / math.sqrt(2.0), s / math.sqrt(2.0)) for s in (1.0, -1.0)]
    return {
        "label": label or f"purification_{n_contaminants + 1}",
        "trap": {"r0_m": 3.0e-3, "v0_volt": 100.0,
                 "omega_rad_s": 2 * math.pi * 1.0e6,
                 "omega_z_rad_s": 2 * math.pi * omega_z_hz,
                 "mode": FULL_RF, "reference_amu": 138.0},
        "ions": [
            {"species": "133Ba", "count": 1, "temperature_k": 0.005,
             "placement": "center"},
            {"species": "132Ba", "count": n_contaminants, "temperature_k": 0.005},
        ],
        "beams": [
            {"direction": list(d), "line": [133, "b", 1, 0],
             "detuning_mhz": det, "saturation": 1.5,
             "linewidth_mhz": 15.2, "targets": "133Ba"}
            for d in cool_dirs for det in (-15.0, -60.0)
        ] + [
            {"direction": [0.0, 0.0, s], "line": [132, "b"],
             "detuning_mhz": det, "saturation": 1.0,
             "linewidth_mhz": 15.2, "targets": "132Ba"}
            for s in (1.0, -1.0) for det in (7.6, 35.0)
        ],
        "dt_s": dt_s,
        "steps": steps,
        "seed": seed,
    }
