"""Shadow session behavior: pairing, divergence, faults, reconnection."""

import socket
import threading

import pytest

from conftest import AMBIENT_C, make_scenario, wait_until
from peltwin.emulator import PlantTruth
from peltwin.engine import DataError, replay, simulate
from peltwin.matching import preset_params
from peltwin.physics import PeltierParams
from peltwin.runtime import (
    SessionStatus,
    TwinSession,
    divergence_report,
    run_offline,
)
from peltwin.control import SetpointProfile
from peltwin.storage import read_runlog, write_runlog


def run_shadow(harness_factory, ticks=120, truth_params=None, twin_params=None,
               noise=False, seed=0, mode="shadow"):
    scenario = make_scenario(noise=noise, seed=seed, duration=float(ticks))
    truth = PlantTruth(
        params=truth_params or scenario.params,
        ambient_profile=((0.0, AMBIENT_C),),
        seed=seed,
    )
    h = harness_factory(truth=truth, scenario=scenario, max_ticks=ticks)
    session = h.attach_session(
        twin_params or scenario.params, scenario, mode=mode
    )
    assert wait_until(lambda: session.status is SessionStatus.SHADOWING, 5.0)
    h.run_ticks()
    assert session.wait_for_samples(ticks, timeout=30.0)
    return h, session


class TestSelfShadow:
    def test_lossless_pairing_and_zero_divergence(self, harness_factory):
        h, session = run_shadow(harness_factory, ticks=300)
        report = session.stop()
        assert report.samples == 300
        assert session.pair_count() == 300
        assert report.rmse_y < 0.01
        assert report.rmse_u == 0.0
        assert report.horizon == 299.0
        assert session.status is SessionStatus.STOPPED

    def test_final_report_matches_posthoc_over_files(self, harness_factory, tmp_path):
        h, session = run_shadow(harness_factory, ticks=120)
        report = session.stop()
        plant_path, twin_path = tmp_path / "plant.csv", tmp_path / "twin.csv"
        write_runlog(session.plant_log(), plant_path)
        write_runlog(session.twin_log(), twin_path)
        posthoc = divergence_report(read_runlog(plant_path), read_runlog(twin_path))
        assert posthoc == report

    def test_replay_equivalence(self, harness_factory):
        h, session = run_shadow(harness_factory, ticks=90)
        session.stop()
        twin_trace = [s.y for s in session.twin_log().samples]
        replayed = [s.y for s in replay(session.plant_log(), session.twin_params).samples]
        assert twin_trace == replayed  # bit-identical

    def test_empty_session_stop_is_an_error(self, harness_factory):
        h = harness_factory(max_ticks=10)  # loop never started
        session = h.attach_session(preset_params("datasheet"), make_scenario())
        assert wait_until(lambda: session.status is SessionStatus.SHADOWING, 5.0)
        with pytest.raises(DataError):
            session.stop()


class TestDivergenceSensitivity:
    def test_wrong_twin_params_diverge_more(self, harness_factory):
        truth = PeltierParams(alpha=0.08, r=3.4, k=0.36, c=24.0)
        _, matched = run_shadow(
            harness_factory, ticks=120, truth_params=truth,
            twin_params=truth, noise=True, seed=3,
        )
        matched_report = matched.stop()
        _, unmatched = run_shadow(
            harness_factory, ticks=120, truth_params=truth,
            twin_params=preset_params("datasheet"), noise=True, seed=3,
        )
        unmatched_report = unmatched.stop()
        assert unmatched_report.rmse_y > matched_report.rmse_y


class TestMirrorMode:
    def test_twin_runs_its_own_controller(self, harness_factory):
        truth = PeltierParams(alpha=0.08, r=3.4, k=0.36, c=24.0)
        _, session = run_shadow(
            harness_factory, ticks=90, truth_params=truth,
            twin_params=preset_params("datasheet"), noise=True, seed=3,
            mode="mirror",
        )
        report = session.stop()
        assert report.rmse_u > 0.0  # control actions now differ


class TestHotSwap:
    def test_swap_applies_at_next_tick_and_keeps_history(self, harness_factory):
        scenario = make_scenario(duration=200.0)
        truth = PlantTruth(params=scenario.params,
                           ambient_profile=((0.0, AMBIENT_C),), seed=0)
        h = harness_factory(truth=truth, scenario=scenario,
                            tick_interval=0.02, max_ticks=200)
        session = h.attach_session(scenario.params, scenario)
        assert wait_until(lambda: session.status is SessionStatus.SHADOWING, 5.0)
        h.server.start_loop()
        assert session.wait_for_samples(20, timeout=20.0)
        before = [p.y_twin for p in session.trace_since(0.0)][:20]
        new_params = PeltierParams(alpha=0.1, r=4.0, k=0.3, c=25.0)
        session.swap_params(new_params)
        assert session.wait_for_samples(40, timeout=20.0)
        assert session.twin_params == new_params
        after = [p.y_twin for p in session.trace_since(0.0)][:20]
        assert before == after  # past pairs untouched
        assert any("swap" in e for e in session.events)
        h.server.stop()


class TestFaults:
    def test_timeout_without_telemetry_faults(self, harness_factory):
        h = harness_factory(max_ticks=10)  # accepting, never ticking
        session = h.attach_session(
            preset_params("datasheet"), make_scenario(), timeout=0.5
        )
        assert wait_until(lambda: session.status is SessionStatus.FAULTED, 10.0)
        assert "telemetry" in (session.fault_reason or "")

    def test_unreachable_endpoint_faults(self):
        session = TwinSession(
            ("127.0.0.1", 1), preset_params("datasheet"), make_scenario(),
            timeout=0.5,
        ).start()
        assert wait_until(lambda: session.status is SessionStatus.FAULTED, 10.0)

    def test_handshake_version_mismatch_is_fatal(self):
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.bind(("127.0.0.1", 0))
        listener.listen(1)
        port = listener.getsockname()[1]

        def impostor():
            conn, _ = listener.accept()
            conn.recv(4096)
            conn.sendall(b'{"type":"HELLO","version":2,"dt":1.0}\n')

        thread = threading.Thread(target=impostor, daemon=True)
        thread.start()
        session = TwinSession(
            ("127.0.0.1", port), preset_params("datasheet"), make_scenario(),
            timeout=1.0,
        ).start()
        assert wait_until(lambda: session.status is SessionStatus.FAULTED, 10.0)
        assert "version" in (session.fault_reason or "")
        listener.close()


class TestReconnect:
    def test_resume_after_dropped_connection_records_gap(self, harness_factory):
        scenario = make_scenario(duration=400.0)
        truth = PlantTruth(params=scenario.params,
                           ambient_profile=((0.0, AMBIENT_C),), seed=0)
        h = harness_factory(truth=truth, scenario=scenario,
                            tick_interval=0.02, max_ticks=400)
        # a reconnect delay of several ticks guarantees samples are missed,
        # so the gap is deterministic rather than a race
        session = h.attach_session(scenario.params, scenario,
                                   timeout=5.0, reconnect_delay=0.1)
        assert wait_until(lambda: session.status is SessionStatus.SHADOWING, 5.0)
        h.server.start_loop()
        assert session.wait_for_samples(10, timeout=20.0)
        count_before = session.pair_count()
        h.server.drop_all_clients()
        assert wait_until(
            lambda: session.pair_count() > count_before + 5, timeout=20.0
        )
        assert session.status is SessionStatus.SHADOWING
        assert len(session.gaps) >= 1
        start, end = session.gaps[0]
        assert end > start
        assert any("gap" in e for e in session.events)
        # paced session: each ingest must consume a small fraction of a tick
        assert session.max_ingest_seconds < 0.1
        h.server.stop()


class TestOffline:
    def test_delegates_to_simulate_bit_for_bit(self):
        base = make_scenario()
        profile = SetpointProfile.constant(50.0)
        offline = run_offline(profile, base.params, 300.0, base)
        direct = simulate(make_scenario(duration=300.0, noise=False))
        assert offline.samples == direct.samples
        assert len(offline.samples) == 301

    def test_different_setpoints_settle_differently(self):
        base = make_scenario()
        hot = run_offline(SetpointProfile.constant(60.0), base.params, 240.0, base)
        warm = run_offline(SetpointProfile.constant(40.0), base.params, 240.0, base)
        assert hot.samples[-1].y == pytest.approx(60.0, abs=1.0)
        assert warm.samples[-1].y == pytest.approx(40.0, abs=1.0)
