"""Sensor noise and quantization behavior."""

import random

import pytest

from peltwin.sensor import SensorModel, quantize, sense


def test_disabled_sensor_passes_through():
    model = SensorModel(accuracy=0.5, quantum=0.1, enabled=False)
    rng = random.Random(1)
    assert sense(50.123456, model, rng) == 50.123456
    # and the generator was not consumed
    assert rng.random() == random.Random(1).random()


def test_readings_stay_inside_accuracy_band():
    model = SensorModel(accuracy=0.5, quantum=0.1)
    rng = random.Random(42)
    readings = [sense(50.0, model, rng) for _ in range(100_000)]
    assert all(49.5 <= y <= 50.5 for y in readings)
    mean = sum(readings) / len(readings)
    assert mean == pytest.approx(50.0, abs=0.01)


def test_quantization_rounds_to_grid():
    model = SensorModel(accuracy=0.0, quantum=0.1)
    rng = random.Random(0)
    assert sense(49.97, model, rng) == pytest.approx(50.0)
    assert sense(49.92, model, rng) == pytest.approx(49.9)


def test_quantize_zero_quantum_is_identity():
    assert quantize(49.97531, 0.0) == 49.97531


def test_seeded_determinism():
    model = SensorModel()
    a = [sense(30.0, model, random.Random(7)) for _ in range(5)]
    b = [sense(30.0, model, random.Random(7)) for _ in range(5)]
    assert a == b


def test_rejects_negative_settings():
    with pytest.raises(ValueError):
        SensorModel(accuracy=-0.1)
    with pytest.raises(ValueError):
        SensorModel(quantum=-0.1)
