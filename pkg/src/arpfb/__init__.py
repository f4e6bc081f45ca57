"""Simulation and feedback control of adiabatic rapid passage along the 87Rb Zeeman ladder."""

from .controller import ControllerConfig, ControllerState, controller_init, expected_edges, process_sample
from .dynamics import (
    EngineState,
    PopulationVector,
    PumpModel,
    apply_probe_pulse,
    build_rotating_hamiltonian,
    evolve_lz,
    evolve_ode,
    lz_probability,
)
from .probe import IQSample, ProbeConfig, magnitude, pulse_times, synthesize_sample
from .sterngerlach import SGConfig, absorption_profile, bin_populations, displacement
from .zeeman import (
    FieldScenario,
    HyperfineState,
    PhysicalConstants,
    SweepProfile,
    Transition,
    allowed_transitions,
    crossing_schedule,
    ladder_path,
    transition_detuning,
    zeeman_shift,
)

__version__ = "0.1.0"
