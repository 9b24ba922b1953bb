"""Deterministic fixed-step closed-loop simulation of the thermal plant.

One scenario couples four pieces each control tick: the sensor reading of the
controlled face, the PID update, the duty-cycle-averaged H-bridge drive, and
RK4 integration of the face-A heat balance at the physics step until the next
tick.  Face B is pinned to ambient (ideal heat sink), so the thermal state
reduces to the single face-A temperature.

Wiring polarity: positive duty must heat face A.  The constitutive equations
make positive current pump heat away from face A, so the Peltier terminals
are connected with the sign flipped relative to the H-bridge output
(``DRIVE_POLARITY``).  Positive duty then drives negative current, which
delivers both Peltier and Joule heat into the controlled face.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .control import (
    PidConfig,
    PidState,
    ProfileKind,
    SetpointProfile,
    pid_reset,
    pid_step,
    setpoint_at,
)
from .physics import (
    DomainError,
    ElectricalDrive,
    EnvironmentConditions,
    PeltierParams,
    SignConvention,
    ThermalState,
    celsius_to_kelvin,
    hbridge_output,
    kelvin_to_celsius,
    peltier_heat_flows,
)
from .sensor import SensorModel, sense

# Peltier terminal polarity relative to the H-bridge output.
DRIVE_POLARITY = -1.0

SOURCE_SIMULATED = "simulated"
SOURCE_EMULATED_PLANT = "emulated_plant"
SOURCE_LIVE_TWIN = "live_twin"


class SimulationDiverged(RuntimeError):
    """Non-finite state during integration; message names the offending time."""


class DataError(ValueError):
    """A run log violates the contract required by the consumer."""


@dataclass(frozen=True)
class Scenario:
    """Everything needed to reproduce one closed-loop run bit for bit."""

    params: PeltierParams
    env: EnvironmentConditions
    pid: PidConfig
    profile: SetpointProfile
    drive: ElectricalDrive = ElectricalDrive()
    convention: SignConvention = SignConvention.ENERGY_CONSERVING
    sensor: SensorModel = SensorModel(enabled=False)
    dt_physics: float = 0.05
    dt_control: float = 1.0
    duration: float = 300.0
    seed: int = 0
    t_initial_c: float | None = None  # None: start at ambient

    def __post_init__(self) -> None:
        if self.dt_physics <= 0.0 or self.dt_control <= 0.0:
            raise DomainError("dt_physics and dt_control must be > 0")
        ratio = self.dt_control / self.dt_physics
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise DomainError(
                f"dt_control={self.dt_control} must be an integer multiple "
                f"of dt_physics={self.dt_physics}"
            )
        if self.duration < 0.0 or not math.isfinite(self.duration):
            raise DomainError(f"duration must be >= 0, got {self.duration!r}")
        if self.seed < 0:
            raise DomainError("seed must be a non-negative integer")

    @property
    def substeps_per_tick(self) -> int:
        return round(self.dt_control / self.dt_physics)

    def with_params(self, params: PeltierParams) -> "Scenario":
        return replace(self, params=params)


@dataclass(frozen=True)
class TelemetrySample:
    """One timestamped record of the closed loop (external units: Celsius)."""

    t: float  # s
    setpoint: float  # degC
    u: float  # signed duty ratio
    y: float  # measured temperature, degC
    t_env: float  # ambient, degC
    i: float  # Peltier current, A
    v: float  # Peltier terminal voltage, V


@dataclass
class RunLog:
    """Ordered telemetry of one session plus the scenario it came from."""

    source: str
    samples: list[TelemetrySample]
    scenario: Scenario | None = None
    events: list[str] = field(default_factory=list)

    def validate(self) -> "RunLog":
        if not self.samples:
            raise DataError("run log has no samples")
        prev_t = None
        for idx, s in enumerate(self.samples):
            values = (s.t, s.setpoint, s.u, s.y, s.t_env, s.i, s.v)
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"non-finite value in sample {idx} (t={s.t!r})")
            if s.t < 0.0:
                raise DataError(f"negative time in sample {idx}")
            if prev_t is not None and s.t <= prev_t:
                raise DataError(
                    f"sample times must be strictly increasing: "
                    f"t={s.t} at index {idx} follows t={prev_t}"
                )
            if abs(s.u) > 1.0 + 1e-12:
                raise DataError(f"duty ratio out of range in sample {idx}: {s.u}")
            prev_t = s.t
        return self

    def times(self) -> list[float]:
        return [s.t for s in self.samples]


class PiecewiseConstant:
    """Left-closed step function over time, for ambient profiles and replays."""

    def __init__(self, segments: Sequence[tuple[float, float]]):
        if not segments:
            raise DataError("piecewise profile needs at least one segment")
        self._segments = sorted(segments)

    def __call__(self, t: float) -> float:
        value = self._segments[0][1]
        for start, seg_value in self._segments:
            if t >= start:
                value = seg_value
            else:
                break
        return value


def face_a_heat_input(
    params: PeltierParams,
    state: ThermalState,
    current: float,
    convention: SignConvention,
) -> float:
    """Heat flowing into the face-A mass, watts, whichever way q_a is oriented."""
    q_a, _ = peltier_heat_flows(params, state, current, convention)
    if convention is SignConvention.PAPER_LITERAL:
        return -q_a
    return q_a


def _integrate_face_a(
    t_a: float,
    t_sink: float,
    v_peltier: float,
    params: PeltierParams,
    dt: float,
    steps: int,
) -> float:
    """RK4 on C*dT_A/dt = heat into face A, with face B held at t_sink.

    The current is re-evaluated from the Seebeck-corrected terminal equation
    at every stage, so the electrical and thermal states stay consistent
    inside each step.
    """
    alpha = params.alpha
    r = params.r
    k = params.k
    c = params.c

    def slope(t: float) -> float:
        i = (v_peltier + alpha * (t - t_sink)) / r
        q_in = -alpha * t * i + 0.5 * i * i * r - k * (t - t_sink)
        return q_in / c

    sixth = dt / 6.0
    half = dt * 0.5
    for _ in range(steps):
        k1 = slope(t_a)
        k2 = slope(t_a + half * k1)
        k3 = slope(t_a + half * k2)
        k4 = slope(t_a + dt * k3)
        t_a += sixth * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return t_a


def advance_open_loop(
    t_a: float,
    span: float,
    u: float,
    t_env_c: float,
    params: PeltierParams,
    v_supply: float,
    dt_physics: float,
) -> float:
    """Advance the face-A temperature over one telemetry interval.

    Zero-order hold of the duty ratio and ambient over the interval.  When
    the span is a whole number of physics steps the configured step is used
    verbatim, so batch replay and the live shadow path produce bit-identical
    trajectories on the nominal grid.
    """
    if span <= 0.0:
        raise DataError(f"interval span must be > 0, got {span!r}")
    t_sink = celsius_to_kelvin(t_env_c)
    v_peltier = DRIVE_POLARITY * u * v_supply
    n_sub = max(1, round(span / dt_physics))
    if abs(n_sub * dt_physics - span) <= 1e-9 * max(1.0, span):
        dt_sub = dt_physics
    else:
        dt_sub = span / n_sub
    return _integrate_face_a(t_a, t_sink, v_peltier, params, dt_sub, n_sub)


def step_physics(
    state: ThermalState,
    drive_voltage: float,
    params: PeltierParams,
    env: EnvironmentConditions,
    convention: SignConvention,
    dt: float,
) -> ThermalState:
    """One RK4 physics step; face B stays pinned to ambient.

    drive_voltage is the H-bridge output; the terminal polarity flip happens
    here, so positive drive heats face A regardless of convention.
    """
    if dt <= 0.0 or not math.isfinite(dt):
        raise DomainError(f"dt must be > 0, got {dt!r}")
    v_peltier = DRIVE_POLARITY * drive_voltage
    t_next = _integrate_face_a(state.t_hot, env.t_ambient, v_peltier, params, dt, 1)
    if not math.isfinite(t_next) or t_next <= 0.0:
        raise SimulationDiverged(f"temperature became non-physical during a {dt} s step")
    return ThermalState(t_hot=t_next, t_cold=env.t_ambient)


class ClosedLoopStepper:
    """Tick-by-tick closed loop shared by batch simulation and the emulated plant.

    ``step()`` emits the telemetry sample for the current tick (sense, PID,
    drive) and then integrates the physics to the next tick.  Setpoint
    overrides registered between steps take effect at the next emitted tick.
    """

    def __init__(
        self,
        scenario: Scenario,
        ambient_c_fn: Callable[[float], float] | None = None,
    ):
        self.scenario = scenario
        self._ambient_c_fn = ambient_c_fn
        self._rng = random.Random(scenario.seed)
        self._pid_state: PidState = pid_reset(scenario.pid)
        self._setpoint_override: float | None = None
        self.tick = 0

        ambient_c = self._ambient_at(0.0)
        self._t_sink = celsius_to_kelvin(ambient_c)
        if scenario.t_initial_c is not None:
            self.t_a = celsius_to_kelvin(scenario.t_initial_c)
        else:
            self.t_a = self._t_sink

    def _ambient_at(self, t: float) -> float:
        if self._ambient_c_fn is not None:
            return self._ambient_c_fn(t)
        return kelvin_to_celsius(self.scenario.env.t_ambient)

    def override_setpoint(self, value_c: float) -> None:
        self._setpoint_override = value_c

    def step(self) -> TelemetrySample:
        sc = self.scenario
        t = self.tick * sc.dt_control
        ambient_c = self._ambient_at(t)
        self._t_sink = celsius_to_kelvin(ambient_c)

        y = sense(kelvin_to_celsius(self.t_a), sc.sensor, self._rng)
        if self._setpoint_override is not None:
            setpoint = self._setpoint_override
        else:
            setpoint = setpoint_at(sc.profile, t)
        u, self._pid_state = pid_step(sc.pid, self._pid_state, setpoint, y, sc.dt_control)

        v_peltier = DRIVE_POLARITY * u * sc.drive.v_supply
        state = ThermalState(t_hot=self.t_a, t_cold=self._t_sink)
        i = (v_peltier + sc.params.alpha * (self.t_a - self._t_sink)) / sc.params.r
        sample = TelemetrySample(
            t=t, setpoint=setpoint, u=u, y=y, t_env=ambient_c, i=i, v=v_peltier
        )

        self.t_a = _integrate_face_a(
            self.t_a, self._t_sink, v_peltier, sc.params,
            sc.dt_physics, sc.substeps_per_tick,
        )
        if not math.isfinite(self.t_a) or self.t_a <= 0.0:
            raise SimulationDiverged(f"state diverged after t={t} s")
        self.tick += 1
        return sample


def simulate(
    scenario: Scenario,
    ambient_c_fn: Callable[[float], float] | None = None,
) -> RunLog:
    """Closed-loop trajectory of the scenario: floor(duration/dt_control)+1 samples.

    Bit-identical output for identical scenarios, seed included.
    """
    stepper = ClosedLoopStepper(scenario, ambient_c_fn)
    n_ticks = math.floor(scenario.duration / scenario.dt_control + 1e-9)
    samples = [stepper.step() for _ in range(n_ticks + 1)]
    return RunLog(source=SOURCE_SIMULATED, samples=samples, scenario=scenario)


def replay(
    run: RunLog,
    params: PeltierParams,
    convention: SignConvention = SignConvention.ENERGY_CONSERVING,
    dt_physics: float | None = None,
) -> RunLog:
    """Open-loop twin pass over a recorded run.

    The recorded duty sequence is zero-order-held over each interval and the
    recorded ambient drives the sink boundary; the twin starts from the first
    recorded measurement.  Output samples land on the recorded time grid with
    the twin's noise-free temperature in place of y.
    """
    run.validate()
    if run.scenario is not None:
        sc = run.scenario
    else:
        sc = None
    if dt_physics is None:
        dt_physics = sc.dt_physics if sc is not None else 0.05
    v_supply = sc.drive.v_supply if sc is not None else 12.0

    t_a = celsius_to_kelvin(run.samples[0].y)
    out: list[TelemetrySample] = []
    for idx, ref in enumerate(run.samples):
        t_sink = celsius_to_kelvin(ref.t_env)
        v_peltier = DRIVE_POLARITY * ref.u * v_supply
        i = (v_peltier + params.alpha * (t_a - t_sink)) / params.r
        out.append(
            TelemetrySample(
                t=ref.t, setpoint=ref.setpoint, u=ref.u,
                y=kelvin_to_celsius(t_a), t_env=ref.t_env, i=i, v=v_peltier,
            )
        )
        if idx + 1 < len(run.samples):
            span = run.samples[idx + 1].t - ref.t
            t_a = advance_open_loop(
                t_a, span, ref.u, ref.t_env, params, v_supply, dt_physics
            )
            if not math.isfinite(t_a) or t_a <= 0.0:
                raise SimulationDiverged(f"replay diverged after t={ref.t} s")

    twin_scenario = run.scenario.with_params(params) if run.scenario else None
    return RunLog(source=SOURCE_LIVE_TWIN, samples=out, scenario=twin_scenario)


def require_same_grid(a: RunLog, b: RunLog, tol: float = 1e-9) -> None:
    """Raise DataError unless both logs share one time grid."""
    if len(a.samples) != len(b.samples):
        raise DataError(
            f"time grids differ in length: {len(a.samples)} vs {len(b.samples)}"
        )
    for idx, (sa, sb) in enumerate(zip(a.samples, b.samples)):
        if abs(sa.t - sb.t) > tol:
            raise DataError(f"time grids differ at index {idx}: {sa.t} vs {sb.t}")
