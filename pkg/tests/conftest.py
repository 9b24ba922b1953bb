"""Shared fixtures: canonical scenarios and a plant+twin harness."""

from __future__ import annotations

import json
import socket
import time

import pytest

from peltwin.control import PidConfig, SetpointProfile, DEFAULT_PID
from peltwin.emulator import PlantServer, PlantTruth
from peltwin.engine import Scenario
from peltwin.matching import preset_params
from peltwin.physics import EnvironmentConditions, celsius_to_kelvin
from peltwin.protocol import LineReader
from peltwin.runtime import TwinSession
from peltwin.sensor import SensorModel

AMBIENT_C = 20.0


def make_scenario(
    params=None,
    setpoint=50.0,
    duration=300.0,
    noise=False,
    seed=0,
    pid: PidConfig = DEFAULT_PID,
    profile: SetpointProfile | None = None,
    **overrides,
) -> Scenario:
    return Scenario(
        params=params or preset_params("datasheet"),
        env=EnvironmentConditions(t_ambient=celsius_to_kelvin(AMBIENT_C)),
        pid=pid,
        profile=profile or SetpointProfile.constant(setpoint),
        sensor=SensorModel(accuracy=0.5, quantum=0.1, enabled=noise),
        duration=duration,
        seed=seed,
        **overrides,
    )


@pytest.fixture
def scenario50() -> Scenario:
    return make_scenario()


class PlantHarness:
    """Plant server plus optional twin session, torn down reliably."""

    def __init__(self, truth: PlantTruth, scenario: Scenario,
                 tick_interval: float = 0.0, max_ticks: int | None = None):
        self.server = PlantServer(
            truth, scenario, tick_interval=tick_interval, max_ticks=max_ticks
        )
        self.server.start()
        self.sessions: list[TwinSession] = []
        self.sockets: list[socket.socket] = []

    @property
    def endpoint(self) -> tuple[str, int]:
        return (self.server.host, self.server.port)

    def attach_session(self, params, scenario, **kwargs) -> TwinSession:
        session = TwinSession(self.endpoint, params, scenario, **kwargs).start()
        self.sessions.append(session)
        return session

    def raw_client(self, handshake: bool = True) -> tuple[socket.socket, LineReader]:
        sock = socket.create_connection(self.endpoint, timeout=5.0)
        sock.settimeout(5.0)
        self.sockets.append(sock)
        reader = LineReader(sock)
        if handshake:
            sock.sendall(b'{"type":"HELLO","version":1}\n')
            reply = json.loads(reader.read_line())
            assert reply["type"] == "HELLO"
        return sock, reader

    def run_ticks(self, wait: float = 30.0) -> None:
        self.server.start_loop()
        assert self.server.finished.wait(timeout=wait), "plant loop never finished"

    def close(self) -> None:
        for session in self.sessions:
            session._stop.set()
            session._close_socket()
        self.server.stop()
        for sock in self.sockets:
            try:
                sock.close()
            except OSError:
                pass
        for session in self.sessions:
            session._thread.join(timeout=5.0)


@pytest.fixture
def harness_factory():
    harnesses: list[PlantHarness] = []

    def factory(truth=None, scenario=None, **kwargs) -> PlantHarness:
        scenario = scenario or make_scenario()
        truth = truth or PlantTruth(
            params=scenario.params, ambient_profile=((0.0, AMBIENT_C),), seed=scenario.seed
        )
        h = PlantHarness(truth, scenario, **kwargs)
        harnesses.append(h)
        return h

    yield factory
    for h in harnesses:
        h.close()


def wait_until(predicate, timeout: float = 10.0, period: float = 0.005) -> bool:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(period)
    return False
