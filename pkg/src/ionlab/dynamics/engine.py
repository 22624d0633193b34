"""Velocity-Verlet N-body integrator with stochastic photon scattering.

One numba core, two builds: the serial reference build is bit-reproducible
from (configuration, seed); the parallel build distributes the O(N^2) force
loop over threads and is only guaranteed to agree statistically (each ion's
force row is still summed in a fixed order, so in practice the two builds
track each other closely).  Scattering draws happen in a fixed serial order
either way.

Ejection bookkeeping: an ion crossing the radial electrode distance or the
axial boundary is marked dead with a timestamp, keeps its final state, and
never reenters force sums.

Temperatures are secular: velocities are averaged over each RF period
(averaging out micromotion to first order) and converted per species via
T = (2/3) <m vbar^2 / 2> / k_B.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange
from scipy.constants import k as K_BOLTZMANN

from .bodies import K_COULOMB, SOFT_CORE_M, chain_equilibrium, crystal_extent
from .scatter import check_rate_guard
from .trap import FULL_RF, check_stability, max_timestep, secular_radial_omega

HBAR = 1.054571817e-34

REFERENCE = "reference"
PARALLEL = "parallel"


def _forces_kernel(pos, alive, charge, mass, cos_t, mode_full, rf_amp,
                   curvature, wr2, forces, clamp_counts):
    n = pos.shape[0]
    for i in prange(n):
        if alive[i] == 0:
            forces[i, 0] = 0.0
            forces[i, 1] = 0.0
            forces[i, 2] = 0.0
            continue
        x = pos[i, 0]
        y = pos[i, 1]
        z = pos[i, 2]
        if mode_full:
            rf = charge[i] * rf_amp * cos_t
            fx = rf * x + 0.5 * curvature * x
            fy = -rf * y + 0.5 * curvature * y
            fz = -curvature * z
        else:
            fx = -mass[i] * wr2[i] * x
            fy = -mass[i] * wr2[i] * y
            fz = -curvature * z
        for j in range(n):
            if j == i or alive[j] == 0:
                continue
            dx = x - pos[j, 0]
            dy = y - pos[j, 1]
            dz = z - pos[j, 2]
            r2 = dx * dx + dy * dy + dz * dz
            r = math.sqrt(r2)
            if r < SOFT_CORE_M:
                clamp_counts[i] += 1
                if r2 == 0.0:
                    dx = SOFT_CORE_M
                    dy = 0.0
                    dz = 0.0
                r = SOFT_CORE_M
            coef = K_COULOMB * charge[i] * charge[j] / (r * r * r)
            fx += coef * dx
            fy += coef * dy
            fz += coef * dz
        forces[i, 0] = fx
        forces[i, 1] = fy
        forces[i, 2] = fz


_forces_serial = njit(cache=True)(_forces_kernel)
_forces_parallel = njit(parallel=True, cache=True)(_forces_kernel)


@njit(cache=True)
def _core(pos, vel, mass, charge, species_id, alive,
          mode_full, rf_amp, omega, curvature, wr2, r0, z_max,
          b_dir, b_k, b_delta, b_gamma, b_sat, b_target,
          dt, steps, seed, use_parallel,
          sample_every, traj, sample_t,
          steps_per_period, temps, temp_t, n_species,
          eject_t, scatter_counts, clamp_counts, err):
    np.random.seed(seed)
    n = pos.shape[0]
    nb = b_k.shape[0]
    forces = np.zeros((n, 3))
    vsum = np.zeros((n, 3))
    esum = np.zeros(n_species)
    ecount = np.zeros(n_species, dtype=np.int64)
    if use_parallel:
        _forces_parallel(pos, alive, charge, mass, 1.0, mode_full, rf_amp,
                         curvature, wr2, forces, clamp_counts)
    else:
        _forces_serial(pos, alive, charge, mass, 1.0, mode_full, rf_amp,
                       curvature, wr2, forces, clamp_counts)
    sample_idx = 0
    period_idx = 0
    period_count = 0
    for step in range(steps):
        t1 = (step + 1) * dt
        for i in range(n):
            if alive[i] == 0:
                continue
            hk = 0.5 * dt / mass[i]
            vel[i, 0] += forces[i, 0] * hk
            vel[i, 1] += forces[i, 1] * hk
            vel[i, 2] += forces[i, 2] * hk
            pos[i, 0] += dt * vel[i, 0]
            pos[i, 1] += dt * vel[i, 1]
            pos[i, 2] += dt * vel[i, 2]
        cos_t = math.cos(omega * t1)
        if use_parallel:
            _forces_parallel(pos, alive, charge, mass, cos_t, mode_full, rf_amp,
                             curvature, wr2, forces, clamp_counts)
        else:
            _forces_serial(pos, alive, charge, mass, cos_t, mode_full, rf_amp,
                           curvature, wr2, forces, clamp_counts)
        for i in range(n):
            if alive[i] == 0:
                continue
            hk = 0.5 * dt / mass[i]
            vel[i, 0] += forces[i, 0] * hk
            vel[i, 1] += forces[i, 1] * hk
            vel[i, 2] += forces[i, 2] * hk
        # stochastic scattering, fixed (ion, beam) order for reproducibility
        for i in range(n):
            if alive[i] == 0:
                continue
            for b in range(nb):
                if b_target[b] >= 0 and b_target[b] != species_id[i]:
                    continue
                if b_sat[b] == 0.0:
                    continue
                kv = (b_dir[b, 0] * vel[i, 0] + b_dir[b, 1] * vel[i, 1]
                      + b_dir[b, 2] * vel[i, 2])
                delta_eff = b_delta[b] - b_k[b] * kv
                xr = 2.0 * delta_eff / b_gamma[b]
                rate = 0.5 * b_gamma[b] * b_sat[b] / (1.0 + b_sat[b] + xr * xr)
                if np.random.random() < rate * dt:
                    dv = HBAR * b_k[b] / mass[i]
                    vel[i, 0] += dv * b_dir[b, 0]
                    vel[i, 1] += dv * b_dir[b, 1]
                    vel[i, 2] += dv * b_dir[b, 2]
                    ez = 1.0 - 2.0 * np.random.random()
                    phi = 2.0 * math.pi * np.random.random()
                    er = math.sqrt(max(0.0, 1.0 - ez * ez))
                    vel[i, 0] += dv * er * math.cos(phi)
                    vel[i, 1] += dv * er * math.sin(phi)
                    vel[i, 2] += dv * ez
                    scatter_counts[i] += 1
        for i in range(n):
            if alive[i] == 0:
                continue
            if (pos[i, 0] * pos[i, 0] + pos[i, 1] * pos[i, 1] > r0 * r0
                    or abs(pos[i, 2]) > z_max):
                alive[i] = 0
                eject_t[i] = t1
        for i in range(n):
            if alive[i] == 1:
                vsum[i, 0] += vel[i, 0]
                vsum[i, 1] += vel[i, 1]
                vsum[i, 2] += vel[i, 2]
        period_count += 1
        if period_count == steps_per_period and period_idx < temps.shape[0]:
            for s in range(n_species):
                esum[s] = 0.0
                ecount[s] = 0
            inv = 1.0 / period_count
            for i in range(n):
                if alive[i] == 1:
                    vx = vsum[i, 0] * inv
                    vy = vsum[i, 1] * inv
                    vz = vsum[i, 2] * inv
                    esum[species_id[i]] += 0.5 * mass[i] * (vx * vx + vy * vy + vz * vz)
                    ecount[species_id[i]] += 1
            for s in range(n_species):
                if ecount[s] > 0:
                    temps[period_idx, s] = (2.0 / 3.0) * esum[s] / ecount[s] / K_BOLTZMANN
                else:
                    temps[period_idx, s] = np.nan
            temp_t[period_idx] = t1
            period_idx += 1
            period_count = 0
            for i in range(n):
                vsum[i, 0] = 0.0
                vsum[i, 1] = 0.0
                vsum[i, 2] = 0.0
        if (step + 1) % sample_every == 0 and sample_idx < traj.shape[0]:
            sample_t[sample_idx] = t1
            for i in range(n):
                traj[sample_idx, i, 0] = pos[i, 0]
                traj[sample_idx, i, 1] = pos[i, 1]
                traj[sample_idx, i, 2] = pos[i, 2]
                traj[sample_idx, i, 3] = vel[i, 0]
                traj[sample_idx, i, 4] = vel[i, 1]
                traj[sample_idx, i, 5] = vel[i, 2]
                traj[sample_idx, i, 6] = alive[i]
            sample_idx += 1
        if (step & 1023) == 0:
            for i in range(n):
                if alive[i] == 1 and not (
                        math.isfinite(pos[i, 0]) and math.isfinite(pos[i, 1])
                        and math.isfinite(pos[i, 2]) and math.isfinite(vel[i, 0])
                        and math.isfinite(vel[i, 1]) and math.isfinite(vel[i, 2])):
                    err[0] = 1
                    err[1] = step
                    return


@dataclass
class SimResult:
    """Everything a run produced.  Wall time is informational and is kept out
    of emitted artifact files so reruns stay byte-identical."""
    species: list
    species_order: list
    sample_times_s: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    alive_samples: np.ndarray
    final_positions: np.ndarray
    final_velocities: np.ndarray
    final_alive: np.ndarray
    ejection_times_s: np.ndarray
    temperature_times_s: np.ndarray
    temperatures_k: np.ndarray
    scatter_counts: np.ndarray
    clamp_events: int
    rng_seed: int
    steps: int
    dt_s: float
    mode: str
    execution: str
    sample_every: int
    rf_period_s: float
    z_max_m: float
    wall_time_s: float = field(repr=False, default=0.0)

    def temperature_series(self, species):
        if species not in self.species_order:
            raise ValueError(f"species {species!r} not in this run "
                             f"(have {self.species_order})")
        col = self.species_order.index(species)
        return self.temperature_times_s, self.temperatures_k[:, col]

    def retained(self, species=None):
        """True if every ion (of a species, or overall) is still trapped."""
        keep = self.final_alive.astype(bool)
        if species is None:
            return bool(np.all(keep))
        sel = np.array([s == species for s in self.species])
        if not np.any(sel):
            raise ValueError(f"species {species!r} not in this run")
        return bool(np.all(keep[sel]))

    def ejected_count(self, species=None):
        gone = ~self.final_alive.astype(bool)
        if species is None:
            return int(np.sum(gone))
        sel = np.array([s == species for s in self.species])
        return int(np.sum(gone & sel))


def default_z_max(trap, n_ions):
    """Ejection boundary: 5x the cold-crystal extent (r0 for a lone ion)."""
    if n_ions < 2:
        return trap.r0_m
    extent = crystal_extent(chain_equilibrium(n_ions, trap.axial_curvature))
    return 5.0 * extent if extent > 0 else trap.r0_m


def run_simulation(trap, ions, beams, dt, steps, seed, *, sample_every=None,
                   execution=REFERENCE, z_max=None):
    """Integrate a trapped-ion system; see module docstring for the contract."""
    if not ions:
        raise ValueError("no ions loaded")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if execution not in (REFERENCE, PARALLEL):
        raise ValueError(f"execution must be {REFERENCE!r} or {PARALLEL!r}, got {execution!r}")
    masses = np.array([ion.mass_kg for ion in ions])
    check_stability(trap, masses)
    dt_bound = max_timestep(trap, masses)
    if dt > dt_bound:
        raise ValueError(
            f"dt = {dt:.3e} s too coarse for {trap.mode} mode; need dt <= {dt_bound:.3e} s")
    check_rate_guard(beams, dt)

    labels = [ion.species for ion in ions]
    species_order = sorted(set(labels))
    loaded = set(labels)
    for i, beam in enumerate(beams):
        if beam.targets is not None and beam.targets not in loaded:
            raise ValueError(f"beam {i} targets {beam.targets!r} but loaded species "
                             f"are {sorted(loaded)}")

    if z_max is None:
        z_max = default_z_max(trap, len(ions))
    pos = np.array([ion.position for ion in ions], float)
    vel = np.array([ion.velocity for ion in ions], float)
    radial = np.hypot(pos[:, 0], pos[:, 1])
    if np.any(radial >= trap.r0_m) or np.any(np.abs(pos[:, 2]) >= z_max):
        raise ValueError("an ion starts outside the trapping boundary "
                         f"(r0 = {trap.r0_m:.3e} m, z_max = {z_max:.3e} m)")

    charge = np.array([ion.charge_c for ion in ions])
    species_id = np.array([species_order.index(s) for s in labels], np.int64)
    alive = np.array([1 if ion.alive else 0 for ion in ions], np.int8)
    mode_full = trap.mode == FULL_RF
    if mode_full:
        wr2 = np.zeros(len(ions))
    else:
        wr2 = np.array([secular_radial_omega(m, trap) ** 2 for m in masses])

    nb = len(beams)
    b_dir = np.zeros((nb, 3))
    b_k = np.zeros(nb)
    b_delta = np.zeros(nb)
    b_gamma = np.zeros(nb)
    b_sat = np.zeros(nb)
    b_target = np.full(nb, -1, np.int64)
    for i, beam in enumerate(beams):
        b_dir[i] = beam.direction
        b_k[i] = beam.k_mag
        b_delta[i] = beam.detuning_rad_s
        b_gamma[i] = beam.gamma_rad_s
        b_sat[i] = beam.saturation
        if beam.targets is not None:
            b_target[i] = species_order.index(beam.targets)

    if sample_every is None:
        sample_every = max(1, steps // 2000)
    n_samples = steps // sample_every
    traj = np.zeros((n_samples, len(ions), 7))
    sample_t = np.zeros(n_samples)
    steps_per_period = max(1, int(round(trap.rf_period_s / dt)))
    n_periods = steps // steps_per_period
    temps = np.zeros((max(n_periods, 1), len(species_order)))
    temp_t = np.zeros(max(n_periods, 1))
    if n_periods == 0:
        temps[:] = np.nan
    eject_t = np.full(len(ions), np.nan)
    scatter_counts = np.zeros(len(ions), np.int64)
    clamp_counts = np.zeros(len(ions), np.int64)
    err = np.zeros(2, np.int64)

    t0 = time.perf_counter()
    _core(pos, vel, masses, charge, species_id, alive,
          mode_full, trap.v0_volt / trap.r0_m ** 2, trap.omega_rad_s,
          trap.axial_curvature, wr2, trap.r0_m, float(z_max),
          b_dir, b_k, b_delta, b_gamma, b_sat, b_target,
          float(dt), int(steps), int(seed), execution == PARALLEL,
          int(sample_every), traj, sample_t,
          steps_per_period, temps, temp_t, len(species_order),
          eject_t, scatter_counts, clamp_counts, err)
    wall = time.perf_counter() - t0
    if err[0] != 0:
        raise RuntimeError(f"integration produced non-finite state at step {err[1]}; "
                           "check dt and initial conditions")

    return SimResult(
        species=labels, species_order=species_order,
        sample_times_s=sample_t, positions=traj[:, :, 0:3].copy(),
        velocities=traj[:, :, 3:6].copy(),
        alive_samples=traj[:, :, 6] > 0.5,
        final_positions=pos, final_velocities=vel, final_alive=alive.copy(),
        ejection_times_s=eject_t,
        temperature_times_s=temp_t[:n_periods] if n_periods else temp_t[:0],
        temperatures_k=temps[:n_periods] if n_periods else temps[:0],
        scatter_counts=scatter_counts, clamp_events=int(np.sum(clamp_counts)) // 2,
        rng_seed=int(seed), steps=int(steps), dt_s=float(dt), mode=trap.mode,
        execution=execution, sample_every=int(sample_every),
        rf_period_s=trap.rf_period_s, z_max_m=float(z_max), wall_time_s=wall)


def measure_temperature(result, species, window_s):
    """Mean secular temperature of a species over the trailing window."""
    if result.mode == FULL_RF and window_s < 10 * result.rf_period_s:
        raise ValueError(f"window {window_s:.2e} s spans fewer than 10 RF periods "
                         f"({result.rf_period_s:.2e} s each)")
    times, series = result.temperature_series(species)
    if times.size == 0:
        raise ValueError("run too short: no completed temperature periods")
    sel = times >= times[-1] - window_s
    vals = series[sel]
    vals = vals[np.isfinite(vals)]
    if vals.size == 0:
        raise ValueError(f"no live {species!r} ions in the measurement window")
    return float(np.mean(vals))
