"""Constitutive-law unit tests against independently written expressions."""

import math

import pytest
from hypothesis import given, strategies as st

from peltwin.physics import (
    DomainError,
    ElectricalDrive,
    PeltierParams,
    SignConvention,
    ThermalState,
    hbridge_output,
    peltier_current,
    peltier_heat_flows,
    peltier_voltage,
    thermal_mass_step,
)

# Independent re-derivations of the published equations, coded separately
# from the implementation so a transcription slip in either shows up.
def q_a_literal(a, r, k, t_a, t_b, i):
    return a * t_a * i - 0.5 * i * i * r + k * (t_a - t_b)


def q_b_literal(a, r, k, t_a, t_b, i):
    return a * t_b * i - 0.5 * i * i * r + k * (t_b - t_a)


def v_terminal(a, r, t_a, t_b, i):
    return a * (t_b - t_a) + i * r


DATASHEET = PeltierParams(alpha=0.053, r=1.8, k=0.5555, c=15.0)

params_st = st.builds(
    PeltierParams,
    alpha=st.floats(0.010, 0.200),
    r=st.floats(1.8, 6.0),
    k=st.floats(0.2, 0.833),
    c=st.floats(15.0, 30.0),
)
state_st = st.builds(
    ThermalState,
    t_hot=st.floats(210.0, 420.0),
    t_cold=st.floats(210.0, 420.0),
)
current_st = st.floats(-8.0, 8.0)


class TestHeatFlows:
    def test_zero_current_conduction_only(self):
        p = DATASHEET
        q_a, q_b = peltier_heat_flows(
            p, ThermalState(310.0, 300.0), 0.0, SignConvention.PAPER_LITERAL
        )
        assert q_a == pytest.approx(0.5555 * 10.0)  # 5.555 W
        assert q_b == pytest.approx(-5.555)
        assert q_a == -q_b

    def test_no_current_no_gradient_is_dead(self):
        p = DATASHEET
        state = ThermalState(300.0, 300.0)
        for convention in SignConvention:
            assert peltier_heat_flows(p, state, 0.0, convention) == (0.0, 0.0)

    def test_paper_matching_arithmetic(self):
        # alpha*T_A*i - i^2 R/2 + K dT = 22.912 - 6.700 + 8.646 = 24.858 W
        p = PeltierParams(alpha=0.0358, r=3.35, k=0.2882, c=15.0)
        q_a, _ = peltier_heat_flows(
            p, ThermalState(320.0, 290.0), 2.0, SignConvention.PAPER_LITERAL
        )
        assert q_a == pytest.approx(q_a_literal(0.0358, 3.35, 0.2882, 320.0, 290.0, 2.0))
        assert q_a == pytest.approx(24.858, abs=1e-12)

    @given(p=params_st, s=state_st, i=current_st)
    def test_paper_literal_matches_oracle_bitwise(self, p, s, i):
        q_a, q_b = peltier_heat_flows(p, s, i, SignConvention.PAPER_LITERAL)
        assert q_a == q_a_literal(p.alpha, p.r, p.k, s.t_hot, s.t_cold, i)
        assert q_b == q_b_literal(p.alpha, p.r, p.k, s.t_hot, s.t_cold, i)

    @given(p=params_st, s=state_st, i=current_st)
    def test_energy_balance_in_conserving_mode(self, p, s, i):
        q_a, q_b = peltier_heat_flows(p, s, i, SignConvention.ENERGY_CONSERVING)
        power = peltier_voltage(p, s, i) * i
        assert abs((q_a - q_b) - power) <= 1e-9 * max(1.0, abs(power))

    @given(p=params_st, s=state_st)
    def test_paper_mode_antisymmetric_at_zero_current(self, p, s):
        q_a, q_b = peltier_heat_flows(p, s, 0.0, SignConvention.PAPER_LITERAL)
        assert q_a == -q_b

    @given(p=params_st, s=state_st, i=current_st)
    def test_purity(self, p, s, i):
        for convention in SignConvention:
            first = peltier_heat_flows(p, s, i, convention)
            second = peltier_heat_flows(p, s, i, convention)
            assert first == second

    def test_monotone_in_hot_temperature_at_zero_current(self):
        p = DATASHEET
        flows = [
            peltier_heat_flows(p, ThermalState(t, 300.0), 0.0,
                               SignConvention.PAPER_LITERAL)[0]
            for t in (290.0, 300.0, 310.0, 350.0)
        ]
        assert all(a < b for a, b in zip(flows, flows[1:]))

    def test_rejects_nonphysical_temperature(self):
        with pytest.raises(DomainError):
            ThermalState(t_hot=-1.0, t_cold=300.0)
        with pytest.raises(DomainError):
            peltier_heat_flows(DATASHEET, ThermalState(300.0, 300.0), math.nan)


class TestVoltageCurrent:
    def test_ohms_law_when_faces_equal(self):
        assert peltier_voltage(DATASHEET, ThermalState(300.0, 300.0), 2.0) == \
            pytest.approx(3.6)

    def test_everything_zero(self):
        assert peltier_voltage(DATASHEET, ThermalState(300.0, 300.0), 0.0) == 0.0

    def test_seebeck_backoff(self):
        # alpha*(T_B - T_A) + iR = 0.053*(-30) + 3.6 = 2.01 V
        s = ThermalState(t_hot=320.0, t_cold=290.0)
        assert peltier_voltage(DATASHEET, s, 2.0) == pytest.approx(2.01)
        assert peltier_voltage(DATASHEET, s, 2.0) == \
            pytest.approx(v_terminal(0.053, 1.8, 320.0, 290.0, 2.0))

    def test_current_inverse_examples(self):
        flat = ThermalState(300.0, 300.0)
        assert peltier_current(DATASHEET, flat, 3.6) == pytest.approx(2.0)
        assert peltier_current(DATASHEET, flat, 0.0) == 0.0
        gradient = ThermalState(320.0, 290.0)
        assert peltier_current(DATASHEET, gradient, 2.01) == pytest.approx(2.0)

    @given(p=params_st, s=state_st, i=current_st)
    def test_round_trip_identity(self, p, s, i):
        back = peltier_current(p, s, peltier_voltage(p, s, i))
        assert back == pytest.approx(i, rel=1e-12, abs=1e-12)


class TestThermalMass:
    def test_zero_flow_keeps_temperature(self):
        assert thermal_mass_step(DATASHEET, 300.0, 0.0, 1.0) == 300.0

    def test_datasheet_capacity(self):
        assert thermal_mass_step(DATASHEET, 300.0, 30.0, 1.0) == pytest.approx(302.0)

    def test_experience_capacity_unit_rise(self):
        p = PeltierParams(alpha=0.075, r=2.90, k=0.3808, c=31.4173)
        assert thermal_mass_step(p, 300.0, 31.4173, 1.0) == pytest.approx(301.0)

    def test_rejects_bad_dt(self):
        with pytest.raises(DomainError):
            thermal_mass_step(DATASHEET, 300.0, 1.0, 0.0)
        with pytest.raises(DomainError):
            thermal_mass_step(DATASHEET, 300.0, 1.0, -0.1)


class TestHBridge:
    def test_idle(self):
        assert hbridge_output(ElectricalDrive(duty=0.0)) == 0.0

    def test_full_duty_is_supply_rail(self):
        assert hbridge_output(ElectricalDrive(duty=1.0, v_supply=12.0)) == 12.0

    def test_signed_average(self):
        assert hbridge_output(ElectricalDrive(duty=-0.5, v_supply=12.0)) == -6.0

    def test_rejects_overdrive(self):
        with pytest.raises(DomainError):
            ElectricalDrive(duty=1.5)
        with pytest.raises(DomainError):
            ElectricalDrive(duty=0.5, v_supply=20.0)  # beyond module rating


class TestParams:
    def test_rejects_nonpositive(self):
        for name in ("alpha", "r", "k", "c"):
            with pytest.raises(DomainError):
                PeltierParams(**{**DATASHEET.__dict__, name: 0.0})

    def test_replace(self):
        p = DATASHEET.replace(r=2.0)
        assert p.r == 2.0 and p.alpha == DATASHEET.alpha
