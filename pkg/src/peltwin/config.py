"""One human-editable YAML document configures the whole pipeline.

The loader is strict: unknown keys are rejected, and every error names the
offending key path and line.  Sections: ``scenario`` (required), ``ga``,
``bounds``, ``endpoints``, ``plant``.  Endpoint addresses can be overridden
by PELTWIN_PLANT_ENDPOINT / PELTWIN_API_ENDPOINT environment variables and
by command-line flags, in that order of increasing precedence.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Any

import yaml

from .emulator import PlantTruth
from .engine import Scenario
from .matching import GaConfig, PARAM_NAMES, ParamBounds
from .physics import kelvin_to_celsius
from .storage import StorageError, params_from_dict, scenario_from_dict

ENV_PLANT_ENDPOINT = "PELTWIN_PLANT_ENDPOINT"
ENV_API_ENDPOINT = "PELTWIN_API_ENDPOINT"


class ConfigError(ValueError):
    def __init__(self, key_path: str, line: int | None, message: str):
        self.key_path = key_path
        self.line = line
        where = f"{key_path} (line {line})" if line is not None else key_path
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class Endpoints:
    plant: tuple[str, int] = ("127.0.0.1", 7700)
    api: tuple[str, int] = ("127.0.0.1", 7800)


@dataclass(frozen=True)
class PlantSettings:
    truth: PlantTruth
    clock: str = "emulated"  # emulated: free-running; wall: dt_control cadence
    max_ticks: int | None = None


@dataclass(frozen=True)
class AppConfig:
    scenario: Scenario
    ga: GaConfig
    bounds: ParamBounds
    endpoints: Endpoints
    plant: PlantSettings


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise ValueError(f"endpoint must look like host:port, got {text!r}")
    return host, int(port)


# -- line-aware YAML --------------------------------------------------------


def _collect_lines(node: Any, path: tuple, lines: dict) -> None:
    lines.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            key = str(key_node.value)
            lines[path + (key,)] = key_node.start_mark.line + 1
            _collect_lines(value_node, path + (key,), lines)
    elif isinstance(node, yaml.SequenceNode):
        for idx, item in enumerate(node.value):
            _collect_lines(item, path + (idx,), lines)


def _path_str(path: tuple) -> str:
    parts = []
    for element in path:
        if isinstance(element, int):
            parts.append(f"[{element}]")
        else:
            parts.append(("." if parts else "") + element)
    return "".join(parts) or "<document>"


class _Section:
    """A mapping plus the source lines of its keys, with strict access."""

    def __init__(self, data: Any, path: tuple, lines: dict):
        self.path = path
        self.lines = lines
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(
                _path_str(path), lines.get(path), "expected a mapping"
            )
        self.data = data

    def line(self, key: str | None = None) -> int | None:
        path = self.path if key is None else self.path + (key,)
        return self.lines.get(path)

    def reject_unknown(self, allowed: set[str]) -> None:
        for key in self.data:
            if key not in allowed:
                raise ConfigError(
                    _path_str(self.path + (key,)), self.line(key),
                    f"unknown key; expected one of {sorted(allowed)}",
                )

    def child(self, key: str) -> "_Section":
        return _Section(self.data.get(key), self.path + (key,), self.lines)

    def value(self, key: str, kind: type | tuple, default: Any = None,
              required: bool = False) -> Any:
        if key not in self.data or self.data[key] is None:
            if required:
                raise ConfigError(
                    _path_str(self.path + (key,)), self.line(),
                    "required key is missing",
                )
            return default
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            raise ConfigError(
                _path_str(self.path + (key,)), self.line(key),
                f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}",
            )
        return value


_SCENARIO_KEYS = {
    "params", "ambient_c", "pid", "setpoint", "drive", "sensor", "convention",
    "dt_physics", "dt_control", "duration", "seed", "initial_c",
}
_PID_KEYS = {"kp", "ki", "kd", "u_min", "u_max", "anti_windup", "derivative_filter_tau"}
_SETPOINT_KEYS = {"kind", "value", "segments"}
_DRIVE_KEYS = {"v_supply", "pwm_frequency", "sense_threshold"}
_SENSOR_KEYS = {"accuracy_c", "quantum_c", "enabled"}
_PARAMS_KEYS = set(PARAM_NAMES) | {"preset"}
_GA_KEYS = {
    "generations", "parent_pool", "mutation_probability", "features_per_mutation",
    "offspring_per_generation", "elitism", "seed", "early_stop_tolerance",
    "weight_y", "weight_u", "workers",
}
_PLANT_KEYS = {"truth", "ambient_profile", "clock", "max_ticks"}
_TRUTH_KEYS = _PARAMS_KEYS | {"hidden_seed"}


def load_config(path: str | os.PathLike) -> AppConfig:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text, source=str(path))


def parse_config(text: str, source: str = "<config>") -> AppConfig:
    try:
        data = yaml.safe_load(text)
        root_node = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError("<document>", line, f"invalid YAML: {exc}") from None

    lines: dict = {}
    if root_node is not None:
        _collect_lines(root_node, (), lines)
    root = _Section(data, (), lines)
    root.reject_unknown({"scenario", "ga", "bounds", "endpoints", "plant"})

    scenario = _parse_scenario(root.child("scenario"), required=True)
    ga = _parse_ga(root.child("ga"))
    bounds = _parse_bounds(root.child("bounds"))
    endpoints = _parse_endpoints(root.child("endpoints"))
    plant = _parse_plant(root.child("plant"), scenario, bounds)
    return AppConfig(
        scenario=scenario, ga=ga, bounds=bounds, endpoints=endpoints, plant=plant
    )


def _parse_scenario(section: _Section, required: bool) -> Scenario:
    if not section.data:
        raise ConfigError("scenario", section.line(), "required section is missing")
    section.reject_unknown(_SCENARIO_KEYS)
    section.child("pid").reject_unknown(_PID_KEYS)
    section.child("setpoint").reject_unknown(_SETPOINT_KEYS)
    section.child("drive").reject_unknown(_DRIVE_KEYS)
    section.child("sensor").reject_unknown(_SENSOR_KEYS)
    section.child("params").reject_unknown(_PARAMS_KEYS)
    for key in ("params", "ambient_c", "pid", "setpoint"):
        if key not in section.data:
            raise ConfigError(
                _path_str(section.path + (key,)), section.line(),
                "required key is missing",
            )
    try:
        return scenario_from_dict(section.data)
    except (StorageError, ValueError) as exc:
        raise ConfigError(_path_str(section.path), section.line(), str(exc)) from None


def _parse_ga(section: _Section) -> GaConfig:
    section.reject_unknown(_GA_KEYS)
    try:
        return GaConfig(
            generations=section.value("generations", int, 100),
            parent_pool=section.value("parent_pool", int, 3),
            mutation_probability=section.value("mutation_probability", float, 0.9),
            features_per_mutation=section.value("features_per_mutation", int, 2),
            offspring_per_generation=section.value("offspring_per_generation", int, 6),
            elitism=section.value("elitism", int, 1),
            seed=section.value("seed", int, 0),
            early_stop_tolerance=section.value("early_stop_tolerance", float, 0.0),
            weight_y=section.value("weight_y", float, 1.0),
            weight_u=section.value("weight_u", float, 1.0),
            workers=section.value("workers", int, 1),
        )
    except ValueError as exc:
        raise ConfigError(_path_str(section.path), section.line(), str(exc)) from None


def _parse_bounds(section: _Section) -> ParamBounds:
    section.reject_unknown(set(PARAM_NAMES))
    kwargs = {}
    for name in PARAM_NAMES:
        interval = section.value(name, list)
        if interval is None:
            continue
        if len(interval) != 2 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in interval
        ):
            raise ConfigError(
                _path_str(section.path + (name,)), section.line(name),
                "expected [low, high]",
            )
        kwargs[name] = (float(interval[0]), float(interval[1]))
    try:
        return ParamBounds(**kwargs)
    except ValueError as exc:
        raise ConfigError(_path_str(section.path), section.line(), str(exc)) from None


def _parse_endpoints(section: _Section) -> Endpoints:
    section.reject_unknown({"plant", "api"})
    defaults = Endpoints()
    values = {}
    for key, default in (("plant", defaults.plant), ("api", defaults.api)):
        text = section.value(key, str)
        if text is None:
            values[key] = default
            continue
        try:
            values[key] = parse_endpoint(text)
        except ValueError as exc:
            raise ConfigError(
                _path_str(section.path + (key,)), section.line(key), str(exc)
            ) from None
    env_overrides = {
        "plant": os.environ.get(ENV_PLANT_ENDPOINT),
        "api": os.environ.get(ENV_API_ENDPOINT),
    }
    for key, text in env_overrides.items():
        if text:
            values[key] = parse_endpoint(text)
    return Endpoints(**values)


def _parse_plant(section: _Section, scenario: Scenario, bounds: ParamBounds) -> PlantSettings:
    section.reject_unknown(_PLANT_KEYS)
    truth_section = section.child("truth")
    truth_section.reject_unknown(_TRUTH_KEYS)

    ambient_default = kelvin_to_celsius(scenario.env.t_ambient)
    profile_raw = section.value("ambient_profile", list)
    if profile_raw is None:
        ambient_profile = ((0.0, ambient_default),)
    else:
        segments = []
        for idx, pair in enumerate(profile_raw):
            if (not isinstance(pair, list) or len(pair) != 2
                    or not all(isinstance(v, (int, float)) for v in pair)):
                raise ConfigError(
                    _path_str(section.path + ("ambient_profile", idx)),
                    section.lines.get(section.path + ("ambient_profile", idx)),
                    "expected [time_s, ambient_c]",
                )
            segments.append((float(pair[0]), float(pair[1])))
        ambient_profile = tuple(segments)

    hidden_seed = truth_section.value("hidden_seed", int)
    if hidden_seed is not None:
        rng_truth = PlantTruth.sample(hidden_seed, bounds, ambient_default)
        truth = PlantTruth(
            params=rng_truth.params,
            ambient_profile=ambient_profile,
            seed=hidden_seed,
        )
    elif truth_section.data:
        try:
            params = params_from_dict(truth_section.data)
        except StorageError as exc:
            raise ConfigError(
                _path_str(truth_section.path), truth_section.line(), str(exc)
            ) from None
        truth = PlantTruth(
            params=params, ambient_profile=ambient_profile, seed=scenario.seed
        )
    else:
        truth = PlantTruth(
            params=scenario.params,
            ambient_profile=ambient_profile,
            seed=scenario.seed,
        )

    clock = section.value("clock", str, "emulated")
    if clock not in ("emulated", "wall"):
        raise ConfigError(
            _path_str(section.path + ("clock",)), section.line("clock"),
            "clock must be 'emulated' or 'wall'",
        )
    max_ticks = section.value("max_ticks", int)
    return PlantSettings(truth=truth, clock=clock, max_ticks=max_ticks)
