"""Model and engine parameter sets with validation."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import InputError

FIXED = "fixed"
MAX_PRESSURE = "max_pressure"


@dataclass(frozen=True)
class IdmParams:
    v0: float = 16.67  # desired speed, m/s (per-lane cap applies on top)
    T: float = 1.5  # safe time headway, s
    a_max: float = 2.0  # max acceleration, m/s^2
    b: float = 2.0  # comfortable deceleration, m/s^2 (> 0)
    delta: float = 4.0  # acceleration exponent
    s0: float = 2.0  # minimum jam gap, m

    def validate(self) -> None:
        for name in ("v0", "T", "a_max", "b", "delta", "s0"):
            if getattr(self, name) <= 0:
                raise InputError(f"IdmParams.{name} must be strictly positive")
        if self.delta < 1:
            raise InputError("IdmParams.delta must be >= 1")


@dataclass(frozen=True)
class MobilParams:
    politeness: float = 0.5
    threshold: float = 0.1  # incentive threshold, m/s^2
    b_safe: float = 4.0  # max imposed deceleration on the new follower, m/s^2
    eval_prob: float = 0.9  # per-step probability a vehicle evaluates a change

    def validate(self) -> None:
        if not 0.0 <= self.politeness <= 1.0:
            raise InputError("MobilParams.politeness must lie in [0, 1]")
        if self.threshold <= 0:
            raise InputError("MobilParams.threshold must be > 0")
        if self.b_safe <= 0:
            raise InputError("MobilParams.b_safe must be > 0")
        if not 0.0 < self.eval_prob <= 1.0:
            raise InputError("MobilParams.eval_prob must lie in (0, 1]")


@dataclass(frozen=True)
class EngineConfig:
    dt: float = 1.0  # step interval, s
    lookahead: float = 200.0  # leader sensing horizon, m
    idm: IdmParams = field(default_factory=IdmParams)
    mobil: MobilParams = field(default_factory=MobilParams)
    controller: str = FIXED  # fixed | max_pressure
    vehicle_length: float = 5.0
    threads: int = 1
    speed_window: float = 300.0  # road mean-speed aggregation window, s
    amber: float = 3.0  # tail of each green window treated as red on approach
    s0_floor: float = 0.1  # post-integration minimum bumper gap, m
    mp_interval: float = 15.0  # max-pressure decision interval, s
    mp_min_green: float = 5.0

    def validate(self) -> None:
        if self.dt <= 0:
            raise InputError("EngineConfig.dt must be > 0")
        if self.lookahead <= 0:
            raise InputError("EngineConfig.lookahead must be > 0")
        if self.controller not in (FIXED, MAX_PRESSURE):
            raise InputError(f"unknown controller {self.controller!r}")
        if self.vehicle_length <= 0:
            raise InputError("EngineConfig.vehicle_length must be > 0")
        if self.threads < 1:
            raise InputError("EngineConfig.threads must be >= 1")
        if self.speed_window <= 0:
            raise InputError("EngineConfig.speed_window must be > 0")
        if self.amber < 0:
            raise InputError("EngineConfig.amber must be >= 0")
        if self.s0_floor <= 0:
            raise InputError("EngineConfig.s0_floor must be > 0")
        if self.mp_interval <= 0 or self.mp_min_green < 0:
            raise InputError("invalid max-pressure timing parameters")
        self.idm.validate()
        self.mobil.validate()
