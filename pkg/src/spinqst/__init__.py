"""Boundary-controlled quantum state transfer in spin-1/2 chains.

Pulse design by inverse engineering, exact propagation in the
zero/one-excitation sector with and without dephasing, and reproduction of
the transfer-fidelity, robustness and coupling-budget datasets.
"""

from .errors import CalibrationError, ConfigError, ResolutionError
from .model import (
    ChainModel,
    SubspaceHamiltonian,
    ZenoFrame,
    bus_spectrum,
    full_spin_hamiltonian,
    rotated_hamiltonian,
    single_excitation_hamiltonian,
    sn_transform,
    zeno_effective_hamiltonian,
    zeno_frame,
)
from .propagate import (
    LinearHamiltonian,
    StateTrajectory,
    averaged_fidelity,
    evolve_density,
    evolve_state,
    transfer_fidelity,
)
from .pulse_design import (
    ControlSchedule,
    DesignedPulse,
    PulseParameters,
    ScheduleTable,
    analytic_propagator,
    boundary_couplings,
    calibrate_mu,
    design_pulse,
    integrate_schedules,
    schedule_profiles,
    verify_boundary_conditions,
)

__version__ = "0.1.0"
