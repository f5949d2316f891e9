"""Two-phase microscopic simulation engine."""

from .idm import equilibrium_gap, idm_accel
from .mobil import CHANGE, STAY, VehicleView, evaluate_change, mobil_decide
from .params import FIXED, MAX_PRESSURE, EngineConfig, IdmParams, MobilParams
from .routing import Router, roads_of_route
from .signals import (
    AMBER,
    GREEN,
    RED,
    SignalState,
    advance_fixed,
    connector_state,
    initial_state,
    max_pressure_phase,
    set_phase,
)
from .world import (
    DRIVING,
    FINISHED,
    WAITING,
    SimulationOutput,
    StepReport,
    Vehicle,
    World,
    run,
)

__all__ = [
    "AMBER",
    "CHANGE",
    "DRIVING",
    "FINISHED",
    "FIXED",
    "GREEN",
    "MAX_PRESSURE",
    "RED",
    "STAY",
    "WAITING",
    "EngineConfig",
    "IdmParams",
    "MobilParams",
    "Router",
    "SignalState",
    "SimulationOutput",
    "StepReport",
    "Vehicle",
    "VehicleView",
    "World",
    "advance_fixed",
    "connector_state",
    "equilibrium_gap",
    "evaluate_change",
    "idm_accel",
    "initial_state",
    "max_pressure_phase",
    "mobil_decide",
    "roads_of_route",
    "run",
    "set_phase",
]
