"""Live deployment: the twin shadows a plant endpoint in real time.

For every telemetry sample received from the plant the session advances its
own model over the elapsed interval, driven by the plant's recorded control
action and ambient (shadow mode) or by its own controller (mirror mode), and
pairs the resulting twin temperature with the plant measurement.  Divergence
statistics update incrementally so drift is visible as it develops.

Session contract: ingestion and twin stepping are serialized (one sample is
fully processed before the next is read); API readers see consistent
snapshots behind the session lock; parameter swaps requested while running
take effect at the next tick and are recorded as events, never rewriting
history.
"""

from __future__ import annotations

import logging
import math
import queue
import socket
import threading
import time
from dataclasses import dataclass, replace
from enum import Enum

from . import protocol
from .control import PidState, SetpointProfile, pid_reset, pid_step
from .engine import (
    DRIVE_POLARITY,
    DataError,
    RunLog,
    Scenario,
    SimulationDiverged,
    SOURCE_EMULATED_PLANT,
    SOURCE_LIVE_TWIN,
    TelemetrySample,
    advance_open_loop,
    require_same_grid,
    simulate,
)
from .physics import celsius_to_kelvin, kelvin_to_celsius
from .sensor import SensorModel

logger = logging.getLogger(__name__)


class SessionStatus(str, Enum):
    CONNECTING = "connecting"
    SHADOWING = "shadowing"
    STOPPED = "stopped"
    FAULTED = "faulted"


class SessionError(RuntimeError):
    pass


@dataclass(frozen=True)
class DivergenceReport:
    rmse_y: float  # degC
    max_abs_y: float  # degC
    rmse_u: float  # duty; zero by construction in shadow mode
    horizon: float  # s
    samples: int


def divergence_report(plant: RunLog, twin: RunLog) -> DivergenceReport:
    """Post-hoc divergence between two persisted runs on one grid.

    Accumulates in sample order with the same operations as the live session,
    so a session's final report and this function agree bit for bit.
    """
    plant.validate()
    twin.validate()
    require_same_grid(plant, twin)
    acc = _DivergenceAccumulator()
    for p, t in zip(plant.samples, twin.samples):
        acc.add(p.t, p.y, t.y, p.u, t.u)
    return acc.report()


class _DivergenceAccumulator:
    def __init__(self) -> None:
        self.sum_sq_y = 0.0
        self.sum_sq_u = 0.0
        self.max_abs_y = 0.0
        self.count = 0
        self.t_first = 0.0
        self.t_last = 0.0

    def add(self, t: float, y_plant: float, y_twin: float,
            u_plant: float, u_twin: float) -> None:
        dy = y_plant - y_twin
        du = u_plant - u_twin
        self.sum_sq_y += dy * dy
        self.sum_sq_u += du * du
        if abs(dy) > self.max_abs_y:
            self.max_abs_y = abs(dy)
        if self.count == 0:
            self.t_first = t
        self.t_last = t
        self.count += 1

    def report(self) -> DivergenceReport:
        if self.count < 1:
            raise DataError("no paired samples; nothing to report")
        return DivergenceReport(
            rmse_y=math.sqrt(self.sum_sq_y / self.count),
            max_abs_y=self.max_abs_y,
            rmse_u=math.sqrt(self.sum_sq_u / self.count),
            horizon=self.t_last - self.t_first,
            samples=self.count,
        )


@dataclass(frozen=True)
class PairedSample:
    plant: TelemetrySample
    y_twin: float
    u_twin: float


class TwinSession:
    """Shadow (or mirror) a plant endpoint with the given twin parameters."""

    def __init__(
        self,
        endpoint: tuple[str, int],
        twin_params,
        scenario: Scenario,
        mode: str = "shadow",
        timeout: float = 10.0,
        reconnect_delay: float = 0.05,
    ):
        if mode not in ("shadow", "mirror"):
            raise SessionError(f"unknown session mode {mode!r}")
        self.endpoint = endpoint
        self.scenario = scenario
        self.mode = mode
        self.timeout = timeout
        self.reconnect_delay = reconnect_delay

        self.status = SessionStatus.CONNECTING
        self.fault_reason: str | None = None
        self.dt_expected = scenario.dt_control
        self.events: list[str] = []
        self.gaps: list[tuple[float, float]] = []
        self.max_ingest_seconds = 0.0

        self._twin_params = twin_params
        self._pending_params = None
        self._pid_state: PidState = pid_reset(scenario.pid)
        self._t_a: float | None = None  # kelvin
        self._resync = True
        self._pairs: list[PairedSample] = []
        self._accumulator = _DivergenceAccumulator()
        self._twin_samples: list[TelemetrySample] = []
        self._plant_samples: list[TelemetrySample] = []

        self._lock = threading.RLock()
        self._stop = threading.Event()
        self._sock: socket.socket | None = None
        self._sock_lock = threading.Lock()
        self._thread = threading.Thread(
            target=self._run, name="twin-session", daemon=True
        )
        self._subscribers: list[queue.Queue] = []

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "TwinSession":
        self._thread.start()
        return self

    def wait_for_samples(self, count: int, timeout: float = 30.0) -> bool:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            with self._lock:
                if len(self._pairs) >= count:
                    return True
                if self.status in (SessionStatus.STOPPED, SessionStatus.FAULTED):
                    return len(self._pairs) >= count
            time.sleep(0.002)
        return False

    def wait_until_done(self, timeout: float = 60.0) -> None:
        self._thread.join(timeout=timeout)

    def stop(self) -> DivergenceReport:
        """Stop shadowing and return the final report; error if no samples."""
        self._stop.set()
        self._close_socket()
        self._thread.join(timeout=10.0)
        with self._lock:
            if self.status is not SessionStatus.FAULTED:
                self.status = SessionStatus.STOPPED
            self.publish({"type": "STATUS", "status": self.status.value})
            return self._accumulator.report()

    # -- wire loop ---------------------------------------------------------

    def _connect_once(self) -> tuple[socket.socket, protocol.LineReader]:
        sock = socket.create_connection(self.endpoint, timeout=self.timeout)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        reader = protocol.LineReader(sock)
        protocol.send_message(sock, {
            "type": protocol.MSG_HELLO, "version": protocol.PROTOCOL_VERSION,
        })
        while True:
            line = reader.read_line()
            if line is None:
                raise SessionError("plant closed the connection during handshake")
            reply = protocol.decode(line)
            if reply["type"] == protocol.MSG_ERROR:
                raise _FatalHandshake(f"plant rejected handshake: {reply.get('msg')}")
            if reply["type"] == protocol.MSG_HELLO:
                version = reply.get("version")
                if version != protocol.PROTOCOL_VERSION:
                    raise _FatalHandshake(
                        f"protocol version mismatch: plant={version!r} "
                        f"twin={protocol.PROTOCOL_VERSION}"
                    )
                dt = reply.get("dt")
                if isinstance(dt, (int, float)) and dt > 0:
                    self.dt_expected = float(dt)
                return sock, reader
            # Anything else before HELLO is ignored (late telemetry etc).

    def _run(self) -> None:
        first_connect = True
        while not self._stop.is_set():
            episode_start = time.monotonic()
            connection = None
            while connection is None:
                try:
                    connection = self._connect_once()
                except _FatalHandshake as exc:
                    self._fault(str(exc))
                    return
                except (OSError, SessionError, protocol.ProtocolError) as exc:
                    if time.monotonic() - episode_start > self.timeout:
                        self._fault(f"plant unreachable for {self.timeout} s: {exc}")
                        return
                    if self._stop.wait(timeout=self.reconnect_delay):
                        return

            sock, reader = connection
            with self._sock_lock:
                self._sock = sock
            with self._lock:
                self.status = SessionStatus.SHADOWING
                if not first_connect:
                    self.events.append("reconnected")
                    self._resync = True
            first_connect = False

            try:
                self._read_telemetry(reader)
            except socket.timeout:
                self._fault(
                    f"no telemetry for {self.timeout} s; report preserved"
                )
                return
            except (OSError, protocol.ProtocolError):
                pass  # disconnect: fall through to reconnect
            finally:
                self._close_socket()

            if self._stop.is_set():
                return
            with self._lock:
                self.status = SessionStatus.CONNECTING
                self.events.append("connection lost; attempting resume")
            if self._stop.wait(timeout=self.reconnect_delay):
                return

    def _read_telemetry(self, reader: protocol.LineReader) -> None:
        assert self._sock is not None
        self._sock.settimeout(self.timeout)
        while not self._stop.is_set():
            line = reader.read_line()
            if line is None:
                raise OSError("connection closed by plant")
            try:
                message = protocol.decode(line)
            except protocol.ProtocolError as exc:
                logger.warning("ignoring malformed plant message: %s", exc)
                continue
            if message["type"] == protocol.MSG_TELEMETRY:
                sample = protocol.parse_telemetry(message)
                started = time.perf_counter()
                try:
                    self._ingest(sample)
                except SimulationDiverged as exc:
                    self._fault(str(exc))
                    return
                elapsed = time.perf_counter() - started
                if elapsed > self.max_ingest_seconds:
                    self.max_ingest_seconds = elapsed
            elif message["type"] == protocol.MSG_ERROR:
                logger.warning("plant error: %s", message.get("msg"))

    def _close_socket(self) -> None:
        with self._sock_lock:
            if self._sock is not None:
                # shutdown() wakes a recv() blocked in another thread;
                # close() alone leaves it stuck until the socket timeout.
                try:
                    self._sock.shutdown(socket.SHUT_RDWR)
                except OSError:
                    pass
                try:
                    self._sock.close()
                except OSError:
                    pass
                self._sock = None

    def _fault(self, reason: str) -> None:
        if self._stop.is_set():
            return
        with self._lock:
            self.status = SessionStatus.FAULTED
            self.fault_reason = reason
            self.events.append(f"fault: {reason}")
            self.publish({"type": "STATUS", "status": "faulted", "msg": reason})
        logger.error("twin session faulted: %s", reason)

    # -- twin stepping -----------------------------------------------------

    def _ingest(self, sample: TelemetrySample) -> None:
        sc = self.scenario
        with self._lock:
            if self._pending_params is not None:
                self._twin_params = self._pending_params
                self._pending_params = None
                self.events.append(
                    f"twin parameters swapped at t={sample.t}"
                )

            prev = self._plant_samples[-1] if self._plant_samples else None
            realign = self._resync or self._t_a is None or prev is None
            if prev is not None:
                span = sample.t - prev.t
                if span <= 0 or span > 1.5 * self.dt_expected:
                    self.gaps.append((prev.t, sample.t))
                    self.events.append(
                        f"telemetry gap from t={prev.t} to t={sample.t}; twin realigned"
                    )
                    realign = True

            if realign:
                self._t_a = celsius_to_kelvin(sample.y)
                self._resync = False
            else:
                drive_u = prev.u if self.mode == "shadow" else self._twin_samples[-1].u
                self._t_a = advance_open_loop(
                    self._t_a, sample.t - prev.t, drive_u, prev.t_env,
                    self._twin_params, sc.drive.v_supply, sc.dt_physics,
                )
                if not math.isfinite(self._t_a) or self._t_a <= 0.0:
                    raise SimulationDiverged(
                        f"twin model diverged advancing to t={sample.t} s"
                    )

            y_twin = kelvin_to_celsius(self._t_a)
            if self.mode == "mirror":
                u_twin, self._pid_state = pid_step(
                    sc.pid, self._pid_state, sample.setpoint, y_twin,
                    self.dt_expected,
                )
            else:
                u_twin = sample.u

            t_sink = celsius_to_kelvin(sample.t_env)
            v_peltier = DRIVE_POLARITY * u_twin * sc.drive.v_supply
            i_twin = (
                v_peltier + self._twin_params.alpha * (self._t_a - t_sink)
            ) / self._twin_params.r

            self._plant_samples.append(sample)
            self._twin_samples.append(TelemetrySample(
                t=sample.t, setpoint=sample.setpoint, u=u_twin,
                y=y_twin, t_env=sample.t_env, i=i_twin, v=v_peltier,
            ))
            pair = PairedSample(plant=sample, y_twin=y_twin, u_twin=u_twin)
            self._pairs.append(pair)
            self._accumulator.add(sample.t, sample.y, y_twin, sample.u, u_twin)
            self.publish(pair_to_wire(pair))

    # -- operator surface ---------------------------------------------------

    @property
    def twin_params(self):
        with self._lock:
            return self._twin_params

    def swap_params(self, params) -> None:
        """Install new twin parameters; effective at the next tick."""
        with self._lock:
            self._pending_params = params
            self.events.append("twin parameter swap requested")

    def send_setpoint(self, value_c: float) -> None:
        with self._sock_lock:
            if self._sock is None:
                raise SessionError("no live plant connection")
            protocol.send_message(self._sock, protocol.setpoint_message(value_c))

    def trace_since(self, since: float) -> list[PairedSample]:
        with self._lock:
            return [p for p in self._pairs if p.plant.t >= since]

    def pair_count(self) -> int:
        with self._lock:
            return len(self._pairs)

    def report(self) -> DivergenceReport:
        with self._lock:
            return self._accumulator.report()

    def plant_log(self) -> RunLog:
        with self._lock:
            return RunLog(
                source=SOURCE_EMULATED_PLANT,
                samples=list(self._plant_samples),
                scenario=self.scenario.with_params(self._twin_params),
                events=list(self.events),
            )

    def twin_log(self) -> RunLog:
        with self._lock:
            return RunLog(
                source=SOURCE_LIVE_TWIN,
                samples=list(self._twin_samples),
                scenario=self.scenario.with_params(self._twin_params),
                events=list(self.events),
            )

    def subscribe(self) -> queue.Queue:
        q: queue.Queue = queue.Queue(maxsize=2048)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)

    def publish(self, payload: dict) -> None:
        """Fan a JSON-ready payload out to every push-channel subscriber."""
        with self._lock:
            subscribers = tuple(self._subscribers)
        for q in subscribers:
            try:
                q.put_nowait(payload)
            except queue.Full:
                try:
                    q.get_nowait()
                    q.put_nowait(payload)
                except queue.Empty:
                    pass


class _FatalHandshake(SessionError):
    pass


def pair_to_wire(pair: PairedSample) -> dict:
    """Paired-sample JSON object for /trace and the push channel."""
    p = pair.plant
    return {
        "type": "PAIR",
        "t": p.t, "setpoint": p.setpoint, "u": p.u, "y": p.y,
        "t_env": p.t_env, "i": p.i, "v": p.v,
        "y_twin": pair.y_twin, "u_twin": pair.u_twin,
    }


def shadow(
    endpoint: tuple[str, int],
    twin_params,
    scenario: Scenario,
    mode: str = "shadow",
    timeout: float = 10.0,
) -> TwinSession:
    """Connect to a plant and start shadowing; returns the live session."""
    return TwinSession(
        endpoint, twin_params, scenario, mode=mode, timeout=timeout
    ).start()


def run_offline(
    profile: SetpointProfile,
    twin_params,
    duration: float,
    base_scenario: Scenario,
) -> RunLog:
    """What-if run with the twin parameters; same contract as simulate()."""
    scenario = replace(
        base_scenario,
        params=twin_params,
        profile=profile,
        duration=duration,
        sensor=SensorModel(enabled=False),
    )
    return simulate(scenario)
