"""Two-level photon-scattering rate model for laser cooling and heating.

Each beam addresses one transition of one species with a rate

    R = (Gamma/2) * s / (1 + s + (2*delta_eff/Gamma)^2),
    delta_eff = delta - k.v,

all in angular units internally.  A scattering event absorbs hbar*k along the
beam and emits hbar*k in an isotropically random direction.  Coherences and
dark states are out of scope; repump structure is collapsed into effective
cooling beams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.constants import hbar, k as k_boltzmann

from ..spectra import branch_wavelength, transition_line

# Rate-equation validity bound: per-beam scattering probability per step.
MAX_SCATTER_PROB = 0.1

DEFAULT_LINEWIDTH_MHZ = 15.2  # configured constant for the 493 nm line


@dataclass(frozen=True)
class BeamSpec:
    direction: np.ndarray
    wavelength_m: float
    detuning_mhz: float
    saturation: float
    linewidth_mhz: float = DEFAULT_LINEWIDTH_MHZ
    targets: str | None = None  # species label; None addresses every species
    line: tuple | None = None  # provenance: (a, branch, F_lower, F_upper)

    def __post_init__(self):
        d = np.array(self.direction, float)
        if d.shape != (3,) or not np.all(np.isfinite(d)):
            raise ValueError("beam direction must be a finite 3-vector")
        norm = np.linalg.norm(d)
        if norm == 0.0:
            raise ValueError("beam direction cannot be the zero vector")
        object.__setattr__(self, "direction", d / norm)
        if self.wavelength_m <= 0:
            raise ValueError(f"wavelength must be positive, got {self.wavelength_m}")
        if self.saturation < 0:
            raise ValueError(f"saturation cannot be negative, got {self.saturation}")
        if self.linewidth_mhz <= 0:
            raise ValueError(f"linewidth must be positive, got {self.linewidth_mhz}")

    @property
    def k_mag(self):
        return 2.0 * math.pi / self.wavelength_m

    @property
    def gamma_rad_s(self):
        return 2.0 * math.pi * self.linewidth_mhz * 1e6

    @property
    def detuning_rad_s(self):
        return 2.0 * math.pi * self.detuning_mhz * 1e6


def beam_for_line(a, branch, f_lower=None, f_upper=None, *, direction,
                  detuning_mhz, saturation, linewidth_mhz=DEFAULT_LINEWIDTH_MHZ,
                  targets=None):
    """Beam addressing a registry transition; wavelength follows the branch.

    ``targets`` defaults to the addressed isotope's own species label.
    """
    line = transition_line(a, branch, f_lower, f_upper)
    if not line.allowed:
        raise ValueError(
            f"{a}Ba {branch} F={f_lower}->F'={f_upper} is dipole-forbidden; "
            "a beam cannot drive it")
    if targets is None:
        targets = f"{int(a)}Ba"
    return BeamSpec(direction=np.array(direction, float),
                    wavelength_m=branch_wavelength(branch),
                    detuning_mhz=detuning_mhz, saturation=saturation,
                    linewidth_mhz=linewidth_mhz, targets=targets,
                    line=(line.isotope, line.branch, line.f_lower, line.f_upper))


def scattering_rate(beam, velocity):
    """Photon scattering rate (1/s) for an ion moving at ``velocity``."""
    gamma = beam.gamma_rad_s
    delta_eff = beam.detuning_rad_s - beam.k_mag * float(beam.direction @ np.asarray(velocity, float))
    s = beam.saturation
    return 0.5 * gamma * s / (1.0 + s + (2.0 * delta_eff / gamma) ** 2)


def max_scatter_rate(beam):
    """Rate at exact resonance; bounds the per-step scattering probability."""
    return 0.5 * beam.gamma_rad_s * beam.saturation / (1.0 + beam.saturation)


def check_rate_guard(beams, dt):
    """Rate-equation validity: every beam must satisfy R*dt < 0.1."""
    for i, beam in enumerate(beams):
        p = max_scatter_rate(beam) * dt
        if p >= MAX_SCATTER_PROB:
            raise ValueError(
                f"beam {i}: peak scattering probability {p:.3f} per step exceeds "
                f"{MAX_SCATTER_PROB}; reduce dt below "
                f"{MAX_SCATTER_PROB / max_scatter_rate(beam):.2e} s")


def isotropic_direction(rng):
    z = 1.0 - 2.0 * rng.random()
    phi = 2.0 * math.pi * rng.random()
    r = math.sqrt(max(0.0, 1.0 - z * z))
    return np.array([r * math.cos(phi), r * math.sin(phi), z])


def scatter_step(ion, beams, dt, rng):
    """One stochastic scattering step; mutates ion velocity in place.

    Returns the number of photons scattered.  Deterministic for a given rng
    state.  Beams whose ``targets`` does not match the ion species are
    skipped without consuming random numbers for the decision order to stay
    reproducible per (ion, beam) pair.
    """
    check_rate_guard(beams, dt)
    if not ion.alive:
        return 0
    photons = 0
    recoil = None
    for beam in beams:
        if beam.targets is not None and beam.targets != ion.species:
            continue
        if beam.saturation == 0.0:
            continue
        p = scattering_rate(beam, ion.velocity) * dt
        if rng.random() < p:
            dv = hbar * beam.k_mag / ion.mass_kg
            ion.velocity = ion.velocity + dv * beam.direction + dv * isotropic_direction(rng)
            photons += 1
    return photons


def doppler_limit_k(linewidth_mhz=DEFAULT_LINEWIDTH_MHZ):
    """Doppler cooling limit hbar*Gamma/(2 k_B) in kelvin."""
    return hbar * 2.0 * math.pi * linewidth_mhz * 1e6 / (2.0 * k_boltzmann)


def recoil_velocity(mass_kg, wl_m):
    """Single-photon recoil speed hbar*k/m."""
    return hbar * (2.0 * math.pi / wl_m) / mass_kg
