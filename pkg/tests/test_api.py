"""Operator API surface, exercised over a live emulated session."""

import json

import pytest
from fastapi.testclient import TestClient

from conftest import AMBIENT_C, make_scenario, wait_until
from peltwin.api import TwinController, create_app
from peltwin.emulator import PlantTruth
from peltwin.matching import GaConfig, ParamBounds
from peltwin.physics import PeltierParams
from peltwin.runtime import SessionStatus


@pytest.fixture
def live(harness_factory):
    """Plant at a 20 ms cadence, shadowed session, API client."""
    scenario = make_scenario(noise=True, seed=6, duration=3600.0)
    truth = PlantTruth(
        params=PeltierParams(alpha=0.07, r=3.0, k=0.45, c=20.0),
        ambient_profile=((0.0, AMBIENT_C),),
        seed=6,
    )
    h = harness_factory(truth=truth, scenario=scenario,
                        tick_interval=0.02, max_ticks=3600)
    session = h.attach_session(scenario.params, scenario)
    assert wait_until(lambda: session.status is SessionStatus.SHADOWING, 5.0)
    h.server.start_loop()
    assert session.wait_for_samples(5, timeout=20.0)
    controller = TwinController(
        session, ParamBounds(),
        GaConfig(generations=3, offspring_per_generation=4, seed=1),
    )
    client = TestClient(create_app(controller))
    yield h, session, client, controller
    client.close()


class TestStatusAndTrace:
    def test_status_reports_live_session(self, live):
        _, session, client, _ = live
        body = client.get("/status").json()
        assert body["status"] == "shadowing"
        assert body["samples"] >= 5
        assert body["dt"] == 1.0
        assert set(body["twin_params"]) == {"alpha", "r", "k", "c"}
        assert body["divergence"]["samples"] == body["samples"]

    def test_trace_since_counts_and_is_monotone(self, live):
        _, session, client, _ = live
        session.wait_for_samples(10, timeout=20.0)
        pairs = client.get("/trace", params={"since": 0.0}).json()["pairs"]
        assert len(pairs) >= 10
        times = [p["t"] for p in pairs]
        assert times == sorted(times)
        assert times[0] == 0.0
        subset = client.get("/trace", params={"since": times[5]}).json()["pairs"]
        assert subset[0]["t"] == times[5]

    def test_trace_pairs_carry_both_sides(self, live):
        _, _, client, _ = live
        pair = client.get("/trace").json()["pairs"][0]
        assert {"y", "y_twin", "u", "u_twin", "setpoint"} <= set(pair)


class TestSetpoint:
    def test_setpoint_round_trip_to_plant(self, live):
        h, session, client, _ = live
        before = session.pair_count()
        response = client.post("/setpoint", json={"value": 42.0})
        assert response.status_code == 200
        assert wait_until(
            lambda: any(
                p.plant.setpoint == 42.0 for p in session.trace_since(0.0)
            ),
            timeout=20.0,
        )
        # effect within two samples of the command
        first_changed = min(
            p.plant.t for p in session.trace_since(0.0) if p.plant.setpoint == 42.0
        )
        assert first_changed <= (before + 2) * 1.0

    def test_out_of_band_value_rejected(self, live):
        _, _, client, _ = live
        response = client.post("/setpoint", json={"value": 500.0})
        assert response.status_code == 400
        assert "safe band" in response.json()["detail"]

    def test_invalid_body_rejected(self, live):
        _, _, client, _ = live
        assert client.post("/setpoint", json={"valve": 50}).status_code == 422


class TestMatch:
    def test_match_returns_result_and_swaps(self, live):
        _, session, client, _ = live
        session.wait_for_samples(30, timeout=30.0)
        old = session.twin_params
        response = client.post("/match", json={})
        assert response.status_code == 200
        body = response.json()
        assert body["swapped"] is True
        assert len(body["history"]) == 3
        assert all(b <= a for a, b in zip(body["history"], body["history"][1:]))
        assert body["best_cost"] <= body["history"][0]
        assert ParamBounds().contains(
            PeltierParams(**body["best"])
        )
        assert wait_until(
            lambda: session.twin_params != old, timeout=20.0
        ), "parameter swap never landed"

    def test_generation_override(self, live):
        _, session, client, _ = live
        session.wait_for_samples(20, timeout=30.0)
        body = client.post("/match", json={"generations": 1}).json()
        assert len(body["history"]) == 1

    def test_conflict_while_running(self, live):
        _, session, client, controller = live
        session.wait_for_samples(20, timeout=30.0)
        assert controller._match_lock.acquire(blocking=False)
        try:
            response = client.post("/match", json={})
            assert response.status_code == 409
            assert "already running" in response.json()["detail"]
        finally:
            controller._match_lock.release()


class TestOffline:
    def test_offline_run_counts_samples(self, live):
        _, _, client, _ = live
        response = client.post("/offline", json={
            "profile": {"kind": "constant", "value": 50.0},
            "duration": 300.0,
        })
        assert response.status_code == 200
        body = response.json()
        assert len(body["samples"]) == 301
        assert body["samples"][-1]["t"] == 300.0

    def test_offline_step_profile(self, live):
        _, _, client, _ = live
        response = client.post("/offline", json={
            "profile": {"kind": "step_sequence",
                        "segments": [[0.0, 30.0], [100.0, 50.0]]},
            "duration": 200.0,
        })
        samples = response.json()["samples"]
        assert samples[99]["setpoint"] == 30.0
        assert samples[100]["setpoint"] == 50.0

    def test_bad_profile_is_400(self, live):
        _, _, client, _ = live
        response = client.post("/offline", json={
            "profile": {"kind": "constant"}, "duration": 10.0,
        })
        assert response.status_code == 400


class TestPresetsEndpoint:
    def test_table_and_bounds(self, live):
        _, _, client, _ = live
        body = client.get("/presets").json()
        names = {entry["name"] for entry in body["presets"]}
        assert {"datasheet", "measurement", "experience", "paper_bm"} <= names
        assert body["bounds"]["alpha"] == [0.010, 0.200]


class TestStream:
    def test_push_channel_delivers_pairs(self, live):
        _, _, client, _ = live
        events = []
        with client.stream("GET", "/stream", params={"limit": 3}) as response:
            for line in response.iter_lines():
                if line.startswith("data: "):
                    events.append(json.loads(line[len("data: "):]))
        assert len(events) == 3
        assert all(e["type"] == "PAIR" for e in events)
        assert events[0]["t"] < events[-1]["t"]


class TestUiMount:
    def test_serves_static_console(self, live, tmp_path):
        h, session, _, controller = live
        ui = tmp_path / "console"
        ui.mkdir()
        (ui / "index.html").write_text("<!doctype html><title>console</title>")
        client = TestClient(create_app(controller, ui_dir=str(ui)))
        response = client.get("/ui/")
        assert response.status_code == 200
        assert "console" in response.text
        client.close()

    def test_missing_ui_dir_is_an_error(self, live, tmp_path):
        _, _, _, controller = live
        with pytest.raises(FileNotFoundError):
            create_app(controller, ui_dir=str(tmp_path / "absent"))


class TestStop:
    def test_stop_returns_final_report_and_saves(self, live, tmp_path):
        h, session, client, _ = live
        session.wait_for_samples(10, timeout=20.0)
        plant_path = tmp_path / "plant.csv"
        twin_path = tmp_path / "twin.csv"
        response = client.post("/stop", json={
            "save_plant": str(plant_path), "save_twin": str(twin_path),
        })
        assert response.status_code == 200
        body = response.json()
        assert body["divergence"]["samples"] >= 10
        assert plant_path.exists() and twin_path.exists()
        assert client.get("/status").json()["status"] == "stopped"
