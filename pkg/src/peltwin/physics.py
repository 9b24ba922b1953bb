"""Constitutive laws of the Peltier thermoelectric assembly.

Everything in this module is a pure function of its arguments: no state, no
randomness, bit-identical outputs for identical inputs.  Temperatures are
absolute (kelvin) because the Peltier heat terms contain products of absolute
temperature and current; all conversion to and from Celsius happens at the
package boundary (telemetry, config files, operator API).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

KELVIN_OFFSET = 273.15

# TEC1-12706 module limit: maximum supply voltage in volts.
V_SUPPLY_MAX = 16.4
# TEC1-12706 rated face-to-face temperature differential, kelvin.
DELTA_T_MAX = 75.0


class DomainError(ValueError):
    """An input lies outside the physical domain of a constitutive law."""


class SignConvention(str, Enum):
    """Orientation convention for the two face heat flows.

    ``PAPER_LITERAL`` evaluates the published equations verbatim; the pair is
    conduction-antisymmetric at zero current but does not balance against
    electrical power.  ``ENERGY_CONSERVING`` orients q_a as heat delivered
    into the face-A thermal mass and q_b as heat drawn from the face-B
    reservoir, so that q_a - q_b equals the electrical power V*i exactly.
    """

    PAPER_LITERAL = "paper_literal"
    ENERGY_CONSERVING = "energy_conserving"


class SinkMode(str, Enum):
    """Boundary condition applied to face B (extension point)."""

    DIRICHLET_AT_AMBIENT = "dirichlet_at_ambient"


def celsius_to_kelvin(t_c: float) -> float:
    return t_c + KELVIN_OFFSET


def kelvin_to_celsius(t_k: float) -> float:
    return t_k - KELVIN_OFFSET


@dataclass(frozen=True)
class PeltierParams:
    """The four identifiable physical parameters of the module.

    alpha: Seebeck coefficient, V/K.
    r:     electrical resistance, ohm.
    k:     face-to-face thermal conductance, W/K.
    c:     lumped heat capacity of the controlled face assembly, J/K.
    """

    alpha: float
    r: float
    k: float
    c: float

    def __post_init__(self) -> None:
        for name in ("alpha", "r", "k", "c"):
            value = getattr(self, name)
            if not math.isfinite(value) or value <= 0.0:
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")

    def replace(self, **changes: float) -> "PeltierParams":
        fields = {"alpha": self.alpha, "r": self.r, "k": self.k, "c": self.c}
        fields.update(changes)
        return PeltierParams(**fields)


@dataclass(frozen=True)
class ThermalState:
    """Absolute face temperatures: t_hot is face A, t_cold is face B (kelvin)."""

    t_hot: float
    t_cold: float

    def __post_init__(self) -> None:
        _require_temperature(self.t_hot, "t_hot")
        _require_temperature(self.t_cold, "t_cold")


@dataclass(frozen=True)
class ElectricalDrive:
    """H-bridge drive configuration.

    duty is the signed PWM duty ratio in [-1, +1]; its sign selects heating
    versus cooling.  pwm_frequency and sense_threshold describe the physical
    power stage and are carried as run metadata only: the twin models the
    500 Hz PWM by its duty-cycle average, which is orders of magnitude faster
    than the thermal response.
    """

    duty: float = 0.0
    v_supply: float = 12.0
    pwm_frequency: float = 500.0
    sense_threshold: float = 0.1

    def __post_init__(self) -> None:
        if not math.isfinite(self.duty) or abs(self.duty) > 1.0:
            raise DomainError(f"duty must lie in [-1, 1], got {self.duty!r}")
        if not 0.0 <= self.v_supply <= V_SUPPLY_MAX:
            raise DomainError(
                f"v_supply must lie in [0, {V_SUPPLY_MAX}] V, got {self.v_supply!r}"
            )


@dataclass(frozen=True)
class EnvironmentConditions:
    """Ambient conditions; t_ambient in kelvin."""

    t_ambient: float
    sink_mode: SinkMode = SinkMode.DIRICHLET_AT_AMBIENT

    def __post_init__(self) -> None:
        _require_temperature(self.t_ambient, "t_ambient")


def _require_temperature(value: float, name: str) -> None:
    if not math.isfinite(value) or value <= 0.0:
        raise DomainError(f"{name} must be a finite absolute temperature > 0 K, got {value!r}")


def peltier_heat_flows(
    p: PeltierParams,
    s: ThermalState,
    i: float,
    convention: SignConvention = SignConvention.ENERGY_CONSERVING,
) -> tuple[float, float]:
    """Heat flows (q_a, q_b) at faces A and B, in watts.

    PAPER_LITERAL:
        q_a = alpha*T_A*i - i^2*R/2 + K*(T_A - T_B)
        q_b = alpha*T_B*i - i^2*R/2 + K*(T_B - T_A)

    ENERGY_CONSERVING (q_a into the face-A mass, q_b out of the face-B
    reservoir; satisfies q_a - q_b == peltier_voltage(p, s, i) * i):
        q_a = -alpha*T_A*i + i^2*R/2 - K*(T_A - T_B)
        q_b = -alpha*T_B*i - i^2*R/2 - K*(T_A - T_B)

    Positive current pumps Peltier heat from face A to face B; each face
    receives half of the Joule heat; conduction leaks from hot to cold.
    """
    _require_temperature(s.t_hot, "t_hot")
    _require_temperature(s.t_cold, "t_cold")
    if not math.isfinite(i):
        raise DomainError(f"current must be finite, got {i!r}")

    joule_half = 0.5 * i * i * p.r
    conduction = p.k * (s.t_hot - s.t_cold)
    if convention is SignConvention.PAPER_LITERAL:
        q_a = p.alpha * s.t_hot * i - joule_half + conduction
        q_b = p.alpha * s.t_cold * i - joule_half - conduction
    else:
        q_a = -p.alpha * s.t_hot * i + joule_half - conduction
        q_b = -p.alpha * s.t_cold * i - joule_half - conduction
    return q_a, q_b


def peltier_voltage(p: PeltierParams, s: ThermalState, i: float) -> float:
    """Terminal voltage: alpha*(T_B - T_A) + i*R."""
    if not math.isfinite(i):
        raise DomainError(f"current must be finite, got {i!r}")
    return p.alpha * (s.t_cold - s.t_hot) + i * p.r


def peltier_current(p: PeltierParams, s: ThermalState, v_applied: float) -> float:
    """Current drawn for an applied terminal voltage (inverse of peltier_voltage)."""
    if p.r <= 0.0:
        raise DomainError(f"resistance must be > 0, got {p.r!r}")
    if not math.isfinite(v_applied):
        raise DomainError(f"applied voltage must be finite, got {v_applied!r}")
    return (v_applied - p.alpha * (s.t_cold - s.t_hot)) / p.r


def thermal_mass_step(p: PeltierParams, t: float, q_net: float, dt: float) -> float:
    """Explicit-Euler temperature update of the lumped mass: t + (q_net/C)*dt.

    The specific-mass factor is folded into C (total capacity in J/K), so the
    heat equation reduces to C*dT/dt = q_net.  Higher-order integrators use
    the same derivative q_net/C through the simulation engine.
    """
    if dt <= 0.0 or not math.isfinite(dt):
        raise DomainError(f"dt must be > 0, got {dt!r}")
    return t + (q_net / p.c) * dt


def hbridge_output(d: ElectricalDrive) -> float:
    """Duty-cycle-averaged H-bridge output voltage: duty * v_supply.

    The sign of the duty ratio stands in for the current-sense comparator
    (0.1 V threshold) that selects heating versus cooling in the power stage.
    """
    if abs(d.duty) > 1.0:
        raise DomainError(f"duty must lie in [-1, 1], got {d.duty!r}")
    return d.duty * d.v_supply
