"""Temperature sensor model: bounded uniform noise plus quantization.

Mirrors the infrared camera used as the feedback element, reduced to a scalar
reading: accuracy is the +/- half-width of its error band in degC, quantum the
reporting resolution.
"""

from __future__ import annotations

import random
from dataclasses import dataclass


@dataclass(frozen=True)
class SensorModel:
    accuracy: float = 0.5  # degC, half-width of uniform error
    quantum: float = 0.1  # degC, reporting resolution (0 disables)
    enabled: bool = True

    def __post_init__(self) -> None:
        if self.accuracy < 0.0:
            raise ValueError(f"accuracy must be >= 0, got {self.accuracy!r}")
        if self.quantum < 0.0:
            raise ValueError(f"quantum must be >= 0, got {self.quantum!r}")


def quantize(value: float, quantum: float) -> float:
    if quantum <= 0.0:
        return value
    return round(value / quantum) * quantum


def sense(t_true_c: float, model: SensorModel, rng: random.Random) -> float:
    """One reading of a true temperature; advances rng deterministically.

    Disabled sensors pass the true value through untouched and do not draw
    from the generator, so a noise-free run consumes no randomness.
    """
    if not model.enabled:
        return t_true_c
    noisy = t_true_c + rng.uniform(-model.accuracy, model.accuracy)
    return quantize(noisy, model.quantum)
