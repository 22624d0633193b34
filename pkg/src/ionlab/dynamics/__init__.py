"""RF Paul trap molecular dynamics with laser cooling and heating."""

from .bodies import (
    IonState,
    ba_ion,
    chain_equilibrium,
    crystal_extent,
    kinetic_temperature,
    pairwise_coulomb,
    thermal_velocities,
)
from .engine import (
    PARALLEL,
    REFERENCE,
    SimResult,
    default_z_max,
    measure_temperature,
    run_simulation,
)
from .scatter import (
    BeamSpec,
    beam_for_line,
    doppler_limit_k,
    recoil_velocity,
    scatter_step,
    scattering_rate,
)
from .trap import (
    FULL_RF,
    PSEUDO,
    TrapConfig,
    check_stability,
    mathieu_q,
    max_timestep,
    secular_axial_omega,
    secular_radial_omega,
    trap_force,
)

__all__ = [
    "IonState", "ba_ion", "chain_equilibrium", "crystal_extent",
    "kinetic_temperature", "pairwise_coulomb", "thermal_velocities",
    "PARALLEL", "REFERENCE", "SimResult", "default_z_max",
    "measure_temperature", "run_simulation",
    "BeamSpec", "beam_for_line", "doppler_limit_k", "recoil_velocity",
    "scatter_step", "scattering_rate",
    "FULL_RF", "PSEUDO", "TrapConfig", "check_stability", "mathieu_q",
    "max_timestep", "secular_axial_omega", "secular_radial_omega", "trap_force",
]
