"""Signal state machines: fixed-phase cycling and max-pressure selection.

Connector states are three-valued: green, amber (the configured tail of a
green window, treated as red by approaching vehicles unless they are within
braking distance of the stop line), red. Unsignalized junctions are always
green. Under max-pressure control phases have no scheduled end, so there is
no amber tail; the controller re-decides every mp_interval seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InputError
from ..network import Junction, SignalProgram

GREEN = "green"
AMBER = "amber"
RED = "red"


@dataclass
class SignalState:
    phase: int = 0
    elapsed: float = 0.0  # seconds since this phase became active
    since_decision: float = 0.0  # max-pressure bookkeeping


def initial_state(program: SignalProgram) -> SignalState:
    """Phase 0 at elapsed 0, pre-advanced by the program's offset."""
    state = SignalState()
    offset = program.offset % program.cycle() if program.phases else 0.0
    advance_fixed(state, program, offset)
    return state


def advance_fixed(state: SignalState, program: SignalProgram, dt: float) -> int:
    """Cycle phases by dt with rollover; returns the new phase index."""
    state.elapsed += dt
    while state.elapsed >= program.phases[state.phase].duration:
        state.elapsed -= program.phases[state.phase].duration
        state.phase = (state.phase + 1) % len(program.phases)
    return state.phase


def connector_state(
    program: SignalProgram | None,
    state: SignalState | None,
    connector_id: int,
    amber: float,
    timed: bool,
) -> str:
    """Signal aspect for one connector; timed=False disables the amber tail."""
    if program is None or state is None:
        return GREEN
    phase = program.phases[state.phase]
    if connector_id not in phase.green:
        return RED
    if timed and amber > 0.0 and state.elapsed >= phase.duration - amber:
        return AMBER
    return GREEN


def max_pressure_phase(
    junction: Junction,
    program: SignalProgram,
    lane_counts,
    pred_of: dict[int, int],
    succ_of: dict[int, int],
) -> int:
    """Index of the phase maximizing total queue pressure.

    Pressure of a phase is the sum over its green connectors of
    (upstream road-lane vehicle count - downstream road-lane vehicle count);
    ties go to the lowest phase index.
    """
    best_idx = 0
    best_pressure = -float("inf")
    for idx, phase in enumerate(program.phases):
        pressure = 0
        for cid in phase.green:
            pressure += lane_counts.get(pred_of[cid], 0) - lane_counts.get(succ_of[cid], 0)
        if pressure > best_pressure:
            best_pressure = pressure
            best_idx = idx
    return best_idx


def set_phase(program: SignalProgram, state: SignalState, index: int) -> None:
    if not 0 <= index < len(program.phases):
        raise InputError(
            f"phase index {index} out of range (program has {len(program.phases)} phases)"
        )
    state.phase = index
    state.elapsed = 0.0
    state.since_decision = 0.0
