"""Operator HTTP API over a live twin session.

The service is a thin, typed facade: every number it serves comes from the
session or the matching engine, and every mutation goes through the same
package functions the CLI uses.  A server-sent-events channel at /stream
pushes each new paired sample (and matching progress) for live charts.
"""

from __future__ import annotations

import json
import os
import queue
import threading
from typing import Iterator, Literal

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .control import SETPOINT_MAX_C, SETPOINT_MIN_C, SetpointProfile
from .engine import DataError, RunLog
from .matching import GaConfig, ParamBounds, PRESETS, ga_optimize
from .physics import PeltierParams
from .runtime import SessionError, TwinSession, pair_to_wire, run_offline
from .storage import write_runlog

PUSH_HEARTBEAT_SECONDS = 5.0


class ParamsModel(BaseModel):
    alpha: float = Field(description="Seebeck coefficient, V/K")
    r: float = Field(description="electrical resistance, ohm")
    k: float = Field(description="thermal conductance, W/K")
    c: float = Field(description="lumped heat capacity, J/K")

    @staticmethod
    def of(p: PeltierParams) -> "ParamsModel":
        return ParamsModel(alpha=p.alpha, r=p.r, k=p.k, c=p.c)

    def to_params(self) -> PeltierParams:
        return PeltierParams(alpha=self.alpha, r=self.r, k=self.k, c=self.c)


class DivergenceModel(BaseModel):
    rmse_y: float
    max_abs_y: float
    rmse_u: float
    horizon: float
    samples: int


class GaProgressModel(BaseModel):
    running: bool
    generation: int = 0
    best_cost: float | None = None
    history: list[float] = []


class StatusResponse(BaseModel):
    status: str
    mode: str
    plant_endpoint: str
    dt: float
    samples: int
    twin_params: ParamsModel
    divergence: DivergenceModel | None
    ga: GaProgressModel
    gaps: int
    events: list[str]


class PairModel(BaseModel):
    t: float
    setpoint: float
    u: float
    y: float
    t_env: float
    i: float
    v: float
    y_twin: float
    u_twin: float


class TraceResponse(BaseModel):
    pairs: list[PairModel]


class SetpointRequest(BaseModel):
    value: float


class SetpointResponse(BaseModel):
    ok: bool
    value: float


class MatchRequest(BaseModel):
    generations: int | None = Field(default=None, ge=0)
    seed: int | None = Field(default=None, ge=0)


class MatchResponse(BaseModel):
    best: ParamsModel
    best_cost: float
    history: list[float]
    evaluations: int
    swapped: bool


class ProfileModel(BaseModel):
    kind: Literal["constant", "step_sequence"] = "constant"
    value: float | None = None
    segments: list[tuple[float, float]] | None = None

    def to_profile(self) -> SetpointProfile:
        if self.kind == "constant":
            if self.value is None:
                raise ValueError("constant profile needs 'value'")
            return SetpointProfile.constant(self.value)
        if not self.segments:
            raise ValueError("step_sequence profile needs 'segments'")
        return SetpointProfile.steps([(float(t), float(v)) for t, v in self.segments])


class OfflineRequest(BaseModel):
    profile: ProfileModel
    duration: float = Field(gt=0)


class SampleModel(BaseModel):
    t: float
    setpoint: float
    u: float
    y: float
    t_env: float
    i: float
    v: float


class RunResponse(BaseModel):
    source: str
    samples: list[SampleModel]


class StopRequest(BaseModel):
    save_plant: str | None = None
    save_twin: str | None = None


class StopResponse(BaseModel):
    divergence: DivergenceModel
    saved: list[str]


class PresetEntry(BaseModel):
    name: str
    params: ParamsModel


class PresetsResponse(BaseModel):
    presets: list[PresetEntry]
    bounds: dict[str, tuple[float, float]]


def _divergence_model(session: TwinSession) -> DivergenceModel | None:
    try:
        report = session.report()
    except DataError:
        return None
    return DivergenceModel(**report.__dict__)


class TwinController:
    """Owns the session plus matching configuration for the API layer."""

    def __init__(
        self,
        session: TwinSession,
        bounds: ParamBounds = ParamBounds(),
        ga_defaults: GaConfig = GaConfig(),
    ):
        self.session = session
        self.bounds = bounds
        self.ga_defaults = ga_defaults
        self._match_lock = threading.Lock()
        self._ga_progress = GaProgressModel(running=False)

    @property
    def ga_progress(self) -> GaProgressModel:
        return self._ga_progress.model_copy()

    def run_match(self, generations: int | None, seed: int | None) -> MatchResponse:
        if not self._match_lock.acquire(blocking=False):
            raise HTTPException(
                status_code=409, detail="behavioral matching already running"
            )
        try:
            reference = self.session.plant_log()
            if len(reference.samples) < 2:
                raise HTTPException(
                    status_code=409, detail="not enough recorded samples to match"
                )
            cfg = self.ga_defaults
            if generations is not None:
                cfg = GaConfig(**{**cfg.__dict__, "generations": generations})
            if seed is not None:
                cfg = GaConfig(**{**cfg.__dict__, "seed": seed})

            history: list[float] = []

            def on_generation(generation: int, best_cost: float) -> None:
                history.append(best_cost)
                self._ga_progress = GaProgressModel(
                    running=True, generation=generation,
                    best_cost=best_cost, history=list(history),
                )
                self.session.publish({
                    "type": "GA", "generation": generation, "best_cost": best_cost,
                })

            self._ga_progress = GaProgressModel(running=True)
            result = ga_optimize(
                reference, self.bounds, cfg,
                self.session.scenario.convention, progress=on_generation,
            )
            self.session.swap_params(result.best)
            self._ga_progress = GaProgressModel(
                running=False, generation=len(result.history),
                best_cost=result.best_cost, history=list(result.history),
            )
            self.session.publish({
                "type": "GA_DONE",
                "best_cost": result.best_cost,
                "best": ParamsModel.of(result.best).model_dump(),
            })
            return MatchResponse(
                best=ParamsModel.of(result.best),
                best_cost=result.best_cost,
                history=result.history,
                evaluations=result.evaluations,
                swapped=True,
            )
        finally:
            self._match_lock.release()


def create_app(controller: TwinController, ui_dir: str | None = None) -> FastAPI:
    """Service over one twin session; ui_dir mounts the built console at /ui.

    CORS is wide open: the console may be served from another origin and the
    API is an unauthenticated operator tool for a trusted network.
    """
    app = FastAPI(title="peltwin operator API", version="1")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )
    session = controller.session

    if ui_dir is not None:
        if not os.path.isdir(ui_dir):
            raise FileNotFoundError(f"dashboard directory {ui_dir!r} not found")
        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    @app.get("/status", response_model=StatusResponse)
    def status() -> StatusResponse:
        return StatusResponse(
            status=session.status.value,
            mode=session.mode,
            plant_endpoint=f"{session.endpoint[0]}:{session.endpoint[1]}",
            dt=session.dt_expected,
            samples=session.pair_count(),
            twin_params=ParamsModel.of(session.twin_params),
            divergence=_divergence_model(session),
            ga=controller.ga_progress,
            gaps=len(session.gaps),
            events=list(session.events),
        )

    @app.get("/trace", response_model=TraceResponse)
    def trace(since: float = 0.0) -> TraceResponse:
        pairs = [
            PairModel(**{k: v for k, v in pair_to_wire(p).items() if k != "type"})
            for p in session.trace_since(since)
        ]
        return TraceResponse(pairs=pairs)

    @app.post("/setpoint", response_model=SetpointResponse)
    def setpoint(request: SetpointRequest) -> SetpointResponse:
        if not SETPOINT_MIN_C <= request.value <= SETPOINT_MAX_C:
            raise HTTPException(
                status_code=400,
                detail=f"setpoint {request.value} outside safe band "
                       f"[{SETPOINT_MIN_C}, {SETPOINT_MAX_C}] degC",
            )
        try:
            session.send_setpoint(request.value)
        except SessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        return SetpointResponse(ok=True, value=request.value)

    @app.post("/match", response_model=MatchResponse)
    def match(request: MatchRequest) -> MatchResponse:
        return controller.run_match(request.generations, request.seed)

    @app.post("/offline", response_model=RunResponse)
    def offline(request: OfflineRequest) -> RunResponse:
        try:
            profile = request.profile.to_profile()
            run = run_offline(
                profile, session.twin_params, request.duration, session.scenario
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from None
        return _run_response(run)

    @app.post("/stop", response_model=StopResponse)
    def stop(request: StopRequest | None = None) -> StopResponse:
        try:
            report = session.stop()
        except DataError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from None
        saved = []
        if request is not None:
            if request.save_plant:
                write_runlog(session.plant_log(), request.save_plant)
                saved.append(request.save_plant)
            if request.save_twin:
                write_runlog(session.twin_log(), request.save_twin)
                saved.append(request.save_twin)
        return StopResponse(divergence=DivergenceModel(**report.__dict__), saved=saved)

    @app.get("/presets", response_model=PresetsResponse)
    def presets() -> PresetsResponse:
        return PresetsResponse(
            presets=[
                PresetEntry(name=name, params=ParamsModel.of(p))
                for name, p in PRESETS.items()
            ],
            bounds={
                name: getattr(controller.bounds, name)
                for name in ("alpha", "r", "k", "c")
            },
        )

    @app.get("/stream")
    def stream(limit: int | None = None) -> StreamingResponse:
        """Server-sent events: one event per paired sample (plus GA progress).

        limit closes the stream after that many events; without it the
        stream runs until the client disconnects.
        """

        def event_source() -> Iterator[str]:
            subscription = session.subscribe()
            sent = 0
            try:
                yield ": connected\n\n"
                while limit is None or sent < limit:
                    try:
                        payload = subscription.get(timeout=PUSH_HEARTBEAT_SECONDS)
                    except queue.Empty:
                        yield ": heartbeat\n\n"
                        continue
                    yield f"data: {json.dumps(payload, separators=(',', ':'))}\n\n"
                    sent += 1
            finally:
                session.unsubscribe(subscription)

        return StreamingResponse(event_source(), media_type="text/event-stream")

    return app


def _run_response(run: RunLog) -> RunResponse:
    return RunResponse(
        source=run.source,
        samples=[
            SampleModel(
                t=s.t, setpoint=s.setpoint, u=s.u, y=s.y,
                t_env=s.t_env, i=s.i, v=s.v,
            )
            for s in run.samples
        ],
    )
