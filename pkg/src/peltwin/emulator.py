"""Emulated physical plant: hidden-parameter closed loop behind a TCP server.

The emulator stands in for the real rig.  It runs the same closed loop as the
simulation engine, but with its own ground-truth parameters, a noisy
quantized sensor in the feedback path, and a telemetry server speaking the
newline-delimited JSON protocol once per control tick.  Clients may send
SETPOINT commands, which take effect at the next tick.

Concurrency: one loop thread owns the plant state.  Each client connection
gets a reader thread and a sender thread; the loop publishes samples into
per-connection bounded queues and never blocks on a slow client (the oldest
queued message is dropped and counted instead).
"""

from __future__ import annotations

import logging
import random
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, replace

from . import protocol
from .control import ControllerFault, SETPOINT_MAX_C, SETPOINT_MIN_C
from .engine import (
    ClosedLoopStepper,
    PiecewiseConstant,
    RunLog,
    Scenario,
    SimulationDiverged,
    SOURCE_EMULATED_PLANT,
)
from .matching import ParamBounds
from .physics import PeltierParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantTruth:
    """Ground-truth plant physics, hidden from protocol clients."""

    params: PeltierParams
    ambient_profile: tuple[tuple[float, float], ...] = ((0.0, 20.0),)
    seed: int = 0

    @staticmethod
    def sample(seed: int, bounds: ParamBounds = ParamBounds(),
               ambient_c: float = 20.0) -> "PlantTruth":
        """Draw hidden parameters uniformly inside the search box."""
        rng = random.Random(seed)
        return PlantTruth(
            params=bounds.sample(rng),
            ambient_profile=((0.0, ambient_c),),
            seed=seed,
        )


class _Connection:
    """One client: reader thread, sender thread, bounded outbound queue."""

    def __init__(self, server: "PlantServer", sock: socket.socket, peer: str):
        self.server = server
        self.sock = sock
        self.peer = peer
        self.handshaken = False
        self.dropped = 0
        self.alive = True
        self._queue: deque[bytes] = deque()
        self._cond = threading.Condition()
        self._reader = threading.Thread(
            target=self._read_loop, name=f"plant-read-{peer}", daemon=True
        )
        self._sender = threading.Thread(
            target=self._send_loop, name=f"plant-send-{peer}", daemon=True
        )

    def start(self) -> None:
        self._reader.start()
        self._sender.start()

    def enqueue(self, payload: bytes) -> None:
        with self._cond:
            if len(self._queue) >= self.server.queue_limit:
                self._queue.popleft()
                self.dropped += 1
                if self.dropped in (1, 100, 10000):
                    logger.warning(
                        "client %s is slow: %d telemetry messages dropped",
                        self.peer, self.dropped,
                    )
            self._queue.append(payload)
            self._cond.notify()

    def close(self) -> None:
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        with self._cond:
            self._cond.notify()

    def _send_loop(self) -> None:
        while True:
            with self._cond:
                while self.alive and not self._queue:
                    self._cond.wait(timeout=0.5)
                if not self.alive and not self._queue:
                    return
                payload = self._queue.popleft() if self._queue else None
            if payload is None:
                continue
            try:
                self.sock.sendall(payload)
            except OSError:
                self.server.drop_connection(self)
                return

    def _read_loop(self) -> None:
        reader = protocol.LineReader(self.sock)
        while self.alive:
            try:
                line = reader.read_line()
            except (OSError, protocol.ProtocolError):
                break
            if line is None:
                break
            if not line.strip():
                continue
            self._handle_line(line)
        self.server.drop_connection(self)

    def _handle_line(self, line: bytes) -> None:
        try:
            message = protocol.decode(line)
        except protocol.ProtocolError as exc:
            self.enqueue(protocol.encode(protocol.error_message(str(exc))))
            return

        kind = message["type"]
        if kind == protocol.MSG_HELLO:
            version = message.get("version")
            if version != protocol.PROTOCOL_VERSION:
                self.enqueue(protocol.encode(protocol.error_message(
                    f"unsupported protocol version {version!r}; "
                    f"server speaks {protocol.PROTOCOL_VERSION}"
                )))
                return
            self.enqueue(protocol.encode(
                protocol.hello_message(self.server.scenario.dt_control)
            ))
            self.handshaken = True
        elif kind == protocol.MSG_SETPOINT:
            try:
                value = protocol.parse_setpoint(message)
            except protocol.ProtocolError as exc:
                self.enqueue(protocol.encode(protocol.error_message(str(exc))))
                return
            if not SETPOINT_MIN_C <= value <= SETPOINT_MAX_C:
                self.enqueue(protocol.encode(protocol.error_message(
                    f"setpoint {value} degC outside safe band "
                    f"[{SETPOINT_MIN_C}, {SETPOINT_MAX_C}]"
                )))
                return
            self.server.queue_setpoint(value)
        else:
            self.enqueue(protocol.encode(protocol.error_message(
                f"unknown message type {kind!r}"
            )))


class PlantServer:
    """Closed-loop plant with a telemetry endpoint.

    tick_interval is the wall pacing in seconds per control tick: the plant's
    dt_control for a live cadence, 0 for as-fast-as-possible emulated time.
    """

    def __init__(
        self,
        truth: PlantTruth,
        scenario: Scenario,
        host: str = "127.0.0.1",
        port: int = 0,
        tick_interval: float = 0.0,
        max_ticks: int | None = None,
        queue_limit: int = 4096,
    ):
        self.truth = truth
        # The loop runs the hidden physics and the hidden noise seed; every
        # visible aspect (controller, profile, sensor spec, rates) comes from
        # the scenario.
        self.scenario = replace(scenario, params=truth.params, seed=truth.seed)
        self.tick_interval = tick_interval
        self.max_ticks = max_ticks
        self.queue_limit = queue_limit

        self._ambient = PiecewiseConstant(truth.ambient_profile)
        self._stepper = ClosedLoopStepper(self.scenario, self._ambient)
        self._samples = []
        self._pending_setpoints: deque[float] = deque()
        self._pending_lock = threading.Lock()
        self._connections: list[_Connection] = []
        self._conn_lock = threading.Lock()
        self._stop = threading.Event()
        self.finished = threading.Event()
        self.overruns = 0

        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(8)
        self.host, self.port = self._listener.getsockname()[:2]
        self._accept_thread = threading.Thread(
            target=self._accept_loop, name="plant-accept", daemon=True
        )
        self._loop_thread: threading.Thread | None = None

    # -- lifecycle ---------------------------------------------------------

    def start(self) -> "PlantServer":
        """Start accepting clients; the loop starts separately."""
        self._accept_thread.start()
        return self

    def start_loop(self) -> "PlantServer":
        self._loop_thread = threading.Thread(
            target=self.run_loop, name="plant-loop", daemon=True
        )
        self._loop_thread.start()
        return self

    def serve_forever(self) -> None:
        self.start()
        self.run_loop()

    def stop(self) -> None:
        self._stop.set()
        try:
            self._listener.close()
        except OSError:
            pass
        with self._conn_lock:
            connections = list(self._connections)
        for conn in connections:
            conn.close()
        if self._loop_thread is not None:
            self._loop_thread.join(timeout=5.0)

    # -- plant loop --------------------------------------------------------

    def run_loop(self) -> None:
        tick = 0
        next_deadline = time.monotonic()
        try:
            while not self._stop.is_set():
                if self.max_ticks is not None and tick >= self.max_ticks:
                    break
                with self._pending_lock:
                    while self._pending_setpoints:
                        self._stepper.override_setpoint(self._pending_setpoints.popleft())
                try:
                    sample = self._stepper.step()
                except (ControllerFault, SimulationDiverged) as exc:
                    # drive parks at zero by ceasing to tick; never silent
                    logger.error("plant loop halted at tick %d: %s", tick, exc)
                    break
                self._samples.append(sample)
                payload = protocol.encode(protocol.telemetry_message(sample))
                self._broadcast(payload)
                tick += 1
                if self.tick_interval > 0.0:
                    next_deadline += self.tick_interval
                    delay = next_deadline - time.monotonic()
                    if delay > 0.0:
                        if self._stop.wait(timeout=delay):
                            break
                    else:
                        self.overruns += 1
                        logger.warning(
                            "plant tick %d overran its %.3f s budget by %.3f s",
                            tick, self.tick_interval, -delay,
                        )
        finally:
            self.finished.set()

    def queue_setpoint(self, value_c: float) -> None:
        with self._pending_lock:
            self._pending_setpoints.append(value_c)

    def _broadcast(self, payload: bytes) -> None:
        with self._conn_lock:
            connections = list(self._connections)
        for conn in connections:
            if conn.handshaken:
                conn.enqueue(payload)

    # -- connections -------------------------------------------------------

    def _accept_loop(self) -> None:
        while not self._stop.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn = _Connection(self, sock, f"{addr[0]}:{addr[1]}")
            with self._conn_lock:
                self._connections.append(conn)
            conn.start()

    def drop_connection(self, conn: _Connection) -> None:
        with self._conn_lock:
            if conn in self._connections:
                self._connections.remove(conn)
        conn.close()

    def drop_all_clients(self) -> None:
        """Forcibly close every client connection (fault injection hook)."""
        with self._conn_lock:
            connections = list(self._connections)
        for conn in connections:
            self.drop_connection(conn)

    # -- observation -------------------------------------------------------

    @property
    def run_log(self) -> RunLog:
        """Ground-truth record of the plant loop (local artifact, never wired)."""
        return RunLog(
            source=SOURCE_EMULATED_PLANT,
            samples=list(self._samples),
            scenario=self.scenario,
        )

    @property
    def dropped_total(self) -> int:
        with self._conn_lock:
            return sum(c.dropped for c in self._connections)


def serve_plant(
    truth: PlantTruth,
    scenario: Scenario,
    endpoint: tuple[str, int],
    tick_interval: float = 0.0,
    max_ticks: int | None = None,
) -> PlantServer:
    """Bind a plant server on the endpoint and run its loop until stopped."""
    server = PlantServer(
        truth, scenario, host=endpoint[0], port=endpoint[1],
        tick_interval=tick_interval, max_ticks=max_ticks,
    )
    server.serve_forever()
    return server
