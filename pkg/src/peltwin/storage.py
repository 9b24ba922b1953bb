"""Persistence for run logs, scenarios, and matching results.

Run logs are CSV with a '#'-prefixed JSON metadata line on top, so they stay
diffable and import cleanly into any analysis tool.  Floats are written with
repr, which round-trips exactly; reading a written log reproduces the
in-memory object bit for bit.
"""

from __future__ import annotations

import json
import math
import os
from typing import Any

from .control import (
    AntiWindup,
    PidConfig,
    ProfileKind,
    SetpointProfile,
)
from .engine import DataError, RunLog, Scenario, TelemetrySample
from .matching import GaConfig, GaResult, PARAM_NAMES, PRESETS
from .physics import (
    ElectricalDrive,
    EnvironmentConditions,
    PeltierParams,
    SignConvention,
    celsius_to_kelvin,
    kelvin_to_celsius,
)
from .sensor import SensorModel

RUNLOG_SCHEMA_VERSION = 1
RUNLOG_COLUMNS = ("t_s", "setpoint_c", "u_duty", "y_c", "t_env_c", "i_a", "v_v")


class StorageError(ValueError):
    """Malformed persisted artifact; message carries file and line context."""


# -- scenario <-> dict ------------------------------------------------------


def params_to_dict(p: PeltierParams) -> dict[str, float]:
    return {name: getattr(p, name) for name in PARAM_NAMES}


def params_from_dict(data: dict[str, Any]) -> PeltierParams:
    if "preset" in data:
        name = data["preset"]
        if name not in PRESETS:
            raise StorageError(f"unknown parameter preset {name!r}")
        return PRESETS[name]
    try:
        return PeltierParams(**{name: float(data[name]) for name in PARAM_NAMES})
    except KeyError as exc:
        raise StorageError(f"params missing key {exc}") from None


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    profile: dict[str, Any] = {"kind": sc.profile.kind.value}
    if sc.profile.kind is ProfileKind.CONSTANT:
        profile["value"] = sc.profile.segments[0][1]
    else:
        profile["segments"] = [list(seg) for seg in sc.profile.segments]
    return {
        "params": params_to_dict(sc.params),
        "ambient_c": kelvin_to_celsius(sc.env.t_ambient),
        "pid": {
            "kp": sc.pid.kp,
            "ki": sc.pid.ki,
            "kd": sc.pid.kd,
            "u_min": sc.pid.u_min,
            "u_max": sc.pid.u_max,
            "anti_windup": sc.pid.aw_mode.value,
            "derivative_filter_tau": sc.pid.derivative_filter_tau,
        },
        "setpoint": profile,
        "drive": {
            "v_supply": sc.drive.v_supply,
            "pwm_frequency": sc.drive.pwm_frequency,
            "sense_threshold": sc.drive.sense_threshold,
        },
        "sensor": {
            "accuracy_c": sc.sensor.accuracy,
            "quantum_c": sc.sensor.quantum,
            "enabled": sc.sensor.enabled,
        },
        "convention": sc.convention.value,
        "dt_physics": sc.dt_physics,
        "dt_control": sc.dt_control,
        "duration": sc.duration,
        "seed": sc.seed,
        "initial_c": sc.t_initial_c,
    }


def scenario_from_dict(data: dict[str, Any]) -> Scenario:
    try:
        pid_data = data.get("pid", {})
        pid = PidConfig(
            kp=float(pid_data["kp"]),
            ki=float(pid_data.get("ki", 0.0)),
            kd=float(pid_data.get("kd", 0.0)),
            u_min=float(pid_data.get("u_min", -1.0)),
            u_max=float(pid_data.get("u_max", 1.0)),
            aw_mode=AntiWindup(pid_data.get("anti_windup", "clamping")),
            derivative_filter_tau=float(pid_data.get("derivative_filter_tau", 0.0)),
        )
        sp = data["setpoint"]
        if sp.get("kind", "constant") == "constant":
            profile = SetpointProfile.constant(float(sp["value"]))
        else:
            profile = SetpointProfile.steps(
                [(float(t), float(v)) for t, v in sp["segments"]]
            )
        drive_data = data.get("drive", {})
        sensor_data = data.get("sensor", {})
        initial = data.get("initial_c")
        return Scenario(
            params=params_from_dict(data["params"]),
            env=EnvironmentConditions(
                t_ambient=celsius_to_kelvin(float(data["ambient_c"]))
            ),
            pid=pid,
            profile=profile,
            drive=ElectricalDrive(
                v_supply=float(drive_data.get("v_supply", 12.0)),
                pwm_frequency=float(drive_data.get("pwm_frequency", 500.0)),
                sense_threshold=float(drive_data.get("sense_threshold", 0.1)),
            ),
            convention=SignConvention(data.get("convention", "energy_conserving")),
            sensor=SensorModel(
                accuracy=float(sensor_data.get("accuracy_c", 0.5)),
                quantum=float(sensor_data.get("quantum_c", 0.1)),
                enabled=bool(sensor_data.get("enabled", True)),
            ),
            dt_physics=float(data.get("dt_physics", 0.05)),
            dt_control=float(data.get("dt_control", 1.0)),
            duration=float(data.get("duration", 300.0)),
            seed=int(data.get("seed", 0)),
            t_initial_c=None if initial is None else float(initial),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"bad scenario document: {exc}") from None


# -- run logs ---------------------------------------------------------------


def write_runlog(run: RunLog, path: str | os.PathLike) -> None:
    """Persist a validated run; refuses empty or inconsistent logs."""
    run.validate()
    meta = {
        "schema": RUNLOG_SCHEMA_VERSION,
        "source": run.source,
        "events": run.events,
        "scenario": scenario_to_dict(run.scenario) if run.scenario else None,
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + json.dumps(meta, separators=(",", ":")) + "\n")
        fh.write(",".join(RUNLOG_COLUMNS) + "\n")
        for s in run.samples:
            row = (s.t, s.setpoint, s.u, s.y, s.t_env, s.i, s.v)
            fh.write(",".join(repr(v) for v in row) + "\n")


def read_runlog(path: str | os.PathLike) -> RunLog:
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise StorageError(f"{path}:1: missing '#' metadata header")
    try:
        meta = json.loads(lines[0][1:].strip())
    except json.JSONDecodeError as exc:
        raise StorageError(f"{path}:1: metadata is not valid JSON: {exc}") from None
    schema = meta.get("schema")
    if schema != RUNLOG_SCHEMA_VERSION:
        raise StorageError(
            f"{path}:1: schema version {schema!r} unsupported "
            f"(expected {RUNLOG_SCHEMA_VERSION})"
        )
    if len(lines) < 2 or lines[1].split(",") != list(RUNLOG_COLUMNS):
        raise StorageError(f"{path}:2: column header must be {','.join(RUNLOG_COLUMNS)}")

    samples: list[TelemetrySample] = []
    prev_t = None
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(RUNLOG_COLUMNS):
            raise StorageError(
                f"{path}:{lineno}: expected {len(RUNLOG_COLUMNS)} fields, got {len(parts)}"
            )
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise StorageError(f"{path}:{lineno}: {exc}") from None
        if not all(math.isfinite(v) for v in values):
            raise StorageError(f"{path}:{lineno}: non-finite value")
        if prev_t is not None and values[0] <= prev_t:
            raise StorageError(
                f"{path}:{lineno}: sample times must be strictly increasing "
                f"({values[0]} follows {prev_t})"
            )
        prev_t = values[0]
        samples.append(TelemetrySample(*values))
    if not samples:
        raise StorageError(f"{path}: no samples")

    scenario = None
    if meta.get("scenario") is not None:
        scenario = scenario_from_dict(meta["scenario"])
    run = RunLog(
        source=meta.get("source", "simulated"),
        samples=samples,
        scenario=scenario,
        events=list(meta.get("events", [])),
    )
    try:
        run.validate()
    except DataError as exc:
        raise StorageError(f"{path}: {exc}") from None
    return run


# -- matching results -------------------------------------------------------


def ga_result_to_dict(result: GaResult) -> dict[str, Any]:
    cfg = result.config
    return {
        "best": params_to_dict(result.best),
        "best_cost": result.best_cost,
        "history": result.history,
        "evaluations": result.evaluations,
        "seed": result.seed,
        "config": {
            "generations": cfg.generations,
            "parent_pool": cfg.parent_pool,
            "mutation_probability": cfg.mutation_probability,
            "features_per_mutation": cfg.features_per_mutation,
            "offspring_per_generation": cfg.offspring_per_generation,
            "elitism": cfg.elitism,
            "seed": cfg.seed,
            "early_stop_tolerance": cfg.early_stop_tolerance,
            "weight_y": cfg.weight_y,
            "weight_u": cfg.weight_u,
            "workers": cfg.workers,
        },
    }


def write_ga_result(result: GaResult, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(ga_result_to_dict(result), fh, indent=2)
        fh.write("\n")


def read_ga_result(path: str | os.PathLike) -> GaResult:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StorageError(f"{path}: not valid JSON: {exc}") from None
    try:
        return GaResult(
            best=params_from_dict(data["best"]),
            best_cost=float(data["best_cost"]),
            history=[float(v) for v in data["history"]],
            evaluations=int(data["evaluations"]),
            seed=int(data["seed"]),
            config=GaConfig(**data["config"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"{path}: bad matching result: {exc}") from None
