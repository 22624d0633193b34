"""Ion states, Coulomb forces, and cold-crystal equilibria."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.constants import atomic_mass, elementary_charge, epsilon_0, k as k_boltzmann
from scipy.optimize import minimize

K_COULOMB = 1.0 / (4.0 * np.pi * epsilon_0)

# Below this separation the Coulomb force is evaluated at the floor distance
# instead of diverging; rare hot close approaches must not blow up a run.
SOFT_CORE_M = 1.0e-9


@dataclass
class IonState:
    species: str
    mass_kg: float
    charge_c: float
    position: np.ndarray
    velocity: np.ndarray
    alive: bool = True

    def __post_init__(self):
        self.position = np.array(self.position, float)
        self.velocity = np.array(self.velocity, float)
        if self.position.shape != (3,) or self.velocity.shape != (3,):
            raise ValueError("position and velocity must be 3-vectors")
        if not (np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("position and velocity must be finite")
        if self.mass_kg <= 0:
            raise ValueError(f"mass must be positive, got {self.mass_kg}")


def ba_ion(a, position=(0.0, 0.0, 0.0), velocity=(0.0, 0.0, 0.0)):
    """A singly charged barium ion of mass number ``a``."""
    return IonState(species=f"{int(a)}Ba", mass_kg=int(a) * atomic_mass,
                    charge_c=elementary_charge,
                    position=np.array(position, float),
                    velocity=np.array(velocity, float))


def pairwise_coulomb(positions, charges, alive=None):
    """Exact O(N^2) pairwise Coulomb forces.

    Returns (forces, n_clamped) where n_clamped counts ion pairs that came
    closer than the soft-core floor and had their force clamped.
    """
    pos = np.asarray(positions, float)
    q = np.asarray(charges, float)
    n = pos.shape[0]
    live = np.ones(n, bool) if alive is None else np.asarray(alive, bool)
    forces = np.zeros_like(pos)
    n_clamped = 0
    for i in range(n):
        if not live[i]:
            continue
        for j in range(i + 1, n):
            if not live[j]:
                continue
            d = pos[i] - pos[j]
            r = np.sqrt(d @ d)
            if r < SOFT_CORE_M:
                n_clamped += 1
                r = SOFT_CORE_M
                if d @ d == 0.0:
                    d = np.array([SOFT_CORE_M, 0.0, 0.0])
            f = K_COULOMB * q[i] * q[j] / r ** 3 * d
            forces[i] += f
            forces[j] -= f
    return forces, n_clamped


def chain_characteristic_length(axial_curvature, charge_c=elementary_charge):
    """Length scale l with l^3 = k_e*e^2/c for the axial chain problem."""
    return (K_COULOMB * charge_c ** 2 / axial_curvature) ** (1.0 / 3.0)


def chain_equilibrium(n, axial_curvature, charge_c=elementary_charge):
    """Equilibrium z positions (sorted, meters) of n equal charges on the trap
    axis in the static well.

    The static well is electrostatic, so the configuration depends only on the
    curvature, not on the ion masses.  Solved by minimizing the dimensionless
    potential 0.5*sum(u^2) + sum_pairs 1/|u_i - u_j| with its analytic
    gradient; simple root-finders fail for long chains.
    """
    if n < 1:
        raise ValueError(f"need at least one ion, got {n}")
    scale = chain_characteristic_length(axial_curvature, charge_c)
    if n == 1:
        return np.zeros(1)

    def pot_grad(u):
        du = u[:, None] - u[None, :]
        np.fill_diagonal(du, np.inf)
        inv = 1.0 / np.abs(du)
        pot = 0.5 * np.sum(u ** 2) + 0.5 * np.sum(inv)
        grad = u - np.sum(np.sign(du) * inv ** 2, axis=1)
        return pot, grad

    u0 = np.linspace(-(n - 1) / 2.0, (n - 1) / 2.0, n) * 1.3
    res = minimize(pot_grad, u0, jac=True, method="L-BFGS-B",
                   options={"maxiter": 20000, "ftol": 1e-15, "gtol": 1e-12})
    if not res.success and np.max(np.abs(res.jac)) > 1e-6:
        raise RuntimeError(f"chain equilibrium solve failed for n={n}: {res.message}")
    return np.sort(res.x) * scale


def crystal_extent(positions):
    """Largest |z| in a set of positions (meters)."""
    pos = np.asarray(positions, float)
    if pos.ndim == 1:
        return float(np.max(np.abs(pos))) if pos.size else 0.0
    return float(np.max(np.abs(pos[:, 2]))) if pos.size else 0.0


def thermal_velocities(masses_kg, temperature_k, rng):
    """Maxwell-Boltzmann velocity draws, one 3-vector per mass."""
    m = np.atleast_1d(np.asarray(masses_kg, float))
    sigma = np.sqrt(k_boltzmann * temperature_k / m)
    return rng.standard_normal((m.size, 3)) * sigma[:, None]


def kinetic_temperature(masses_kg, velocities):
    """Temperature estimator (2/3)<E_k>/k_B from per-sample 3-velocities."""
    m = np.atleast_1d(np.asarray(masses_kg, float))
    v = np.asarray(velocities, float).reshape(-1, 3)
    if v.shape[0] == 0:
        raise ValueError("no velocity samples")
    if m.size == 1:
        m = np.full(v.shape[0], m[0])
    if m.size != v.shape[0]:
        raise ValueError("need one mass per velocity sample")
    e_k = 0.5 * m * np.sum(v ** 2, axis=1)
    return float(2.0 / 3.0 * np.mean(e_k) / k_boltzmann)
