"""Discrete PID controller with conditional-integration anti-windup.

The controller is written as a pure state transition: ``pid_step`` consumes a
state and returns the successor, never mutating its inputs.  The caller owns
the state and must serialize steps for one control loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class ControllerFault(ValueError):
    """Raised on non-finite controller inputs; the loop must park at u = 0."""


class ConfigError(ValueError):
    """Invalid controller or profile configuration."""


class AntiWindup(str, Enum):
    CLAMPING = "clamping"
    # Not part of the nominal configuration surface; exists so the benefit of
    # clamping is measurable against the naive accumulator.
    NONE = "none"


# Safe band for setpoints, Celsius.  Keeps commanded temperatures inside the
# module's rated differential around room ambient.
SETPOINT_MIN_C = -20.0
SETPOINT_MAX_C = 90.0


@dataclass(frozen=True)
class PidConfig:
    """Gains are per-second consistent: ki multiplies the error integral in
    degC*s, kd the error slope in degC/s.  Output is a duty ratio."""

    kp: float
    ki: float = 0.0
    kd: float = 0.0
    u_min: float = -1.0
    u_max: float = 1.0
    aw_mode: AntiWindup = AntiWindup.CLAMPING
    derivative_filter_tau: float = 0.0

    def __post_init__(self) -> None:
        if not (self.u_min < self.u_max):
            raise ConfigError(f"u_min must be < u_max, got [{self.u_min}, {self.u_max}]")
        for name in ("kp", "ki", "kd", "derivative_filter_tau"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.ki < 0.0 or self.kd < 0.0:
            raise ConfigError("ki and kd must be >= 0")
        if self.derivative_filter_tau < 0.0:
            raise ConfigError("derivative_filter_tau must be >= 0")


# Default gains for the 12 V Peltier plant with datasheet parameters: stable,
# non-oscillatory response to a 50 degC step from 20 degC ambient.  They are a
# deliverable default, not a measured property of any physical rig; override
# per scenario as needed.
DEFAULT_PID = PidConfig(kp=0.05, ki=0.004, kd=0.0)


@dataclass(frozen=True)
class PidState:
    integrator: float = 0.0  # accumulated error integral, degC*s
    prev_error: float = 0.0
    prev_derivative: float = 0.0


def pid_reset(cfg: PidConfig) -> PidState:
    """Zeroed controller state (idempotent)."""
    return PidState()


def pid_step(
    cfg: PidConfig, st: PidState, r: float, y: float, dt: float
) -> tuple[float, PidState]:
    """One controller update: returns (u, successor state).

    u = clamp(kp*e + ki*I + kd*d).  Under clamping anti-windup the integral
    is left untouched on any step whose unsaturated output already exceeds
    the active bound in the direction of the error, so the accumulator never
    grows while the actuator is pinned in the same direction.
    """
    if dt <= 0.0 or not math.isfinite(dt):
        raise ConfigError(f"dt must be > 0, got {dt!r}")
    if not (math.isfinite(r) and math.isfinite(y)):
        raise ControllerFault(f"non-finite controller input: r={r!r} y={y!r}")

    e = r - y

    raw_derivative = (e - st.prev_error) / dt
    tau = cfg.derivative_filter_tau
    if tau > 0.0:
        blend = dt / (tau + dt)
        derivative = st.prev_derivative + blend * (raw_derivative - st.prev_derivative)
    else:
        derivative = raw_derivative

    candidate = st.integrator + e * dt
    unsaturated = cfg.kp * e + cfg.ki * candidate + cfg.kd * derivative

    if cfg.aw_mode is AntiWindup.CLAMPING:
        windup = (unsaturated > cfg.u_max and e > 0.0) or (
            unsaturated < cfg.u_min and e < 0.0
        )
        integrator = st.integrator if windup else candidate
    else:
        integrator = candidate

    u = cfg.kp * e + cfg.ki * integrator + cfg.kd * derivative
    u = min(cfg.u_max, max(cfg.u_min, u))

    return u, PidState(integrator=integrator, prev_error=e, prev_derivative=derivative)


class ProfileKind(str, Enum):
    CONSTANT = "constant"
    STEP_SEQUENCE = "step_sequence"


@dataclass(frozen=True)
class SetpointProfile:
    """Piecewise-constant setpoint over time.

    segments is a tuple of (start_time_s, value_c) with strictly increasing
    start times; lookups are left-closed, so a segment's value is active at
    exactly its start time.
    """

    kind: ProfileKind
    segments: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ConfigError("setpoint profile must have at least one segment")
        prev = None
        for start, value in self.segments:
            if prev is not None and start <= prev:
                raise ConfigError(f"segment times must be strictly increasing at t={start}")
            if not SETPOINT_MIN_C <= value <= SETPOINT_MAX_C:
                raise ConfigError(
                    f"setpoint {value} degC outside safe band "
                    f"[{SETPOINT_MIN_C}, {SETPOINT_MAX_C}]"
                )
            prev = start

    @staticmethod
    def constant(value_c: float) -> "SetpointProfile":
        return SetpointProfile(ProfileKind.CONSTANT, ((0.0, value_c),))

    @staticmethod
    def steps(segments: list[tuple[float, float]]) -> "SetpointProfile":
        return SetpointProfile(ProfileKind.STEP_SEQUENCE, tuple(segments))


def setpoint_at(profile: SetpointProfile, t: float) -> float:
    """Value of the active segment at time t (left-closed boundaries)."""
    value = profile.segments[0][1]
    for start, segment_value in profile.segments:
        if t >= start:
            value = segment_value
        else:
            break
    return value
