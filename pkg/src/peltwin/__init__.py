"""Digital twin of a PID-controlled Peltier thermal plant.

Subpackages cover the constitutive physics, the discrete controller, the
closed-loop simulation engine, GA-based parameter matching against recorded
runs, a TCP plant emulator, the live shadow runtime with its operator API,
and CSV/YAML persistence plus the command line.
"""

__version__ = "0.1.0"

from .physics import (  # noqa: F401
    DomainError,
    ElectricalDrive,
    EnvironmentConditions,
    PeltierParams,
    SignConvention,
    ThermalState,
)
from .control import PidConfig, PidState, SetpointProfile  # noqa: F401
from .engine import RunLog, Scenario, TelemetrySample, replay, simulate  # noqa: F401
