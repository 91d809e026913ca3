import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rescuesim import netmodel as nm


def test_flying_power_reference_values():
    # lam1 v^3 + lam2 / v at v = 10, a = 0: 3.7 + 0.50206
    assert nm.flying_power(10, 0, 0.0037, 5.0206) == pytest.approx(4.20206, abs=1e-9)
    assert nm.flying_power(1, 0, 0.0, 1.0) == pytest.approx(1.0)
    # a = g doubles the induced term
    assert nm.flying_power(10, 9.8, 0.0037, 5.0206) == pytest.approx(3.7 + 2 * 0.50206, abs=1e-9)


def test_flying_power_domain_and_hover_floor():
    with pytest.raises(nm.DomainError):
        nm.flying_power(0.0)
    assert nm.flying_power(0.0, hover_floor=0.1) == pytest.approx(nm.flying_power(0.1))


def test_flying_power_shape_around_minimum():
    vs = np.linspace(0.5, 40, 400)
    v_star = nm.min_power_speed(2.0)
    h = 1e-5
    for v in vs:
        d = (nm.flying_power(v + h, 2.0) - nm.flying_power(v - h, 2.0)) / (2 * h)
        if v < v_star * 0.99:
            assert d < 0
        elif v > v_star * 1.01:
            assert d > 0


def test_average_velocity():
    assert nm.average_vehicle_velocity(0, 0.2, 6.667, 20) == 20
    assert nm.average_vehicle_velocity(0.2, 0.2, 6.667, 20) == 6.667
    assert nm.average_vehicle_velocity(0.1, 0.2, 6.667, 20) == pytest.approx(10.0)
    with pytest.raises(nm.DomainError):
        nm.average_vehicle_velocity(0.3, 0.2, 6.667, 20)
    with pytest.raises(nm.DomainError):
        nm.average_vehicle_velocity(-0.01, 0.2, 6.667, 20)


def test_coverage_count_unrolled():
    assert list(nm.coverage_count([4, 4, 4], [0.5, 0.5, 0.5])) == [2.0, 3.0, 3.5]
    assert list(nm.coverage_count([3, 1, 2], [1, 1, 1])) == [0, 0, 0]
    assert list(nm.coverage_count([3, 1, 2], [0, 0, 0])) == [3, 4, 6]
    with pytest.raises(nm.DomainError):
        nm.coverage_count([1.0], [1.5])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 50), st.floats(0, 50), st.floats(0, 1), st.floats(0, 1)),
                min_size=1, max_size=30))
def test_coverage_count_dominance(rows):
    phi_lo = np.array([min(a, b) for a, b, _, _ in rows])
    phi_hi = np.array([max(a, b) for a, b, _, _ in rows])
    o_lo = np.array([min(c, d) for _, _, c, d in rows])
    o_hi = np.array([max(c, d) for _, _, c, d in rows])
    assert np.all(nm.coverage_count(phi_hi, o_lo) >= nm.coverage_count(phi_lo, o_lo) - 1e-9)
    assert np.all(nm.coverage_count(phi_lo, o_hi) <= nm.coverage_count(phi_lo, o_lo) + 1e-9)


def test_shannon_rate_reference():
    ch = nm.ChannelParams(ref_gain=1e-5, pathloss_exp=2, noise=1e-13, noise_mode="psd")
    # SNR = 0.1 * 1e-9 / (1e7 * 1e-13) = 1e-4
    expected = 1e7 * math.log2(1 + 1e-4)
    assert nm.shannon_rate(100, 1e7, 0.1, ch) == pytest.approx(expected, rel=1e-12)
    assert expected == pytest.approx(1.4427e3, rel=1e-3)
    assert nm.shannon_rate(100, 1e7, 0.0, ch) == 0.0
    with pytest.raises(nm.DomainError):
        nm.shannon_rate(0, 1e7, 0.1, ch)


def test_power_mode_ignores_bandwidth_in_noise():
    ch = nm.ChannelParams(noise=1e-13, noise_mode="power")
    snr = 1.0 * 1e-5 / 50 ** 2 / 1e-13
    assert nm.shannon_rate(50, 1e6, 1.0, ch) == pytest.approx(1e6 * math.log2(1 + snr))


@settings(max_examples=50, deadline=None)
@given(st.floats(1, 1e4), st.floats(1.01, 3))
def test_rate_decreasing_in_distance(d, k):
    ch = nm.ChannelParams()
    assert nm.shannon_rate(d * k, 1e6, 1.0, ch) < nm.shannon_rate(d, 1e6, 1.0, ch)


def test_doubling_distance_quarters_snr():
    ch = nm.ChannelParams(pathloss_exp=2.0)
    g1 = nm.channel_gain(100, ch.ref_gain, 2.0)
    g2 = nm.channel_gain(200, ch.ref_gain, 2.0)
    assert g1 / g2 == pytest.approx(4.0)


def _task(**kw):
    base = dict(owner=0, index=0, data_bits=8e6, cycles_per_bit=100, ttl=10.0, urgency=0.5, output_ratio=0.5)
    base.update(kw)
    return nm.Task(**base)


def test_offload_delay_components():
    d = nm.offload_delay(_task(), 4e9, 8e6, 4e6)
    assert d.t_vfc == pytest.approx(0.2)
    assert d.t_a2g == pytest.approx(1.0)
    assert d.t_g2a == pytest.approx(1.0)
    assert d.total == pytest.approx(2.2)
    tiny = nm.offload_delay(_task(output_ratio=1e-12), 4e9, 8e6, 4e6)
    assert tiny.total == pytest.approx(1.2, abs=1e-9)


def test_relay_case_is_slower():
    t = _task()
    direct = nm.offload_delay(t, 4e9, 8e6, 4e6)
    relay = nm.offload_delay(t, 4e9, 8e6, 4e6, in_coverage=False, rate_g2a_relay=4e6, rate_a2a=4e6)
    assert relay.relayed and relay.total > direct.total
    with pytest.raises(nm.DomainError):
        nm.offload_delay(t, 4e9, 8e6, 4e6, in_coverage=False)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e8, 1e10), st.floats(1.01, 5))
def test_delay_decreasing_in_compute(x, k):
    t = _task()
    assert nm.offload_delay(t, x * k, 8e6, 4e6).total < nm.offload_delay(t, x, 8e6, 4e6).total


def test_offload_energy():
    t = _task()
    uav = nm.UavState(0)
    veh = nm.VehicleState(0)
    d = nm.offload_delay(t, 4e9, 8e6, 4e6)
    e = nm.offload_energy(t, 4e9, d, uav, veh)
    assert e.e_vfc == pytest.approx(1.28)
    assert e.e_a2g == pytest.approx(uav.tx_power * d.t_a2g)
    p_fly = nm.flying_power(uav.velocity, uav.acceleration)
    assert e.e_fly == pytest.approx(p_fly * d.total)
    assert nm.offload_energy(t, 0.0, d, uav, veh).e_vfc == 0.0


def test_deadline_and_battery_predicates():
    t = _task(ttl=2.2)
    d = nm.offload_delay(t, 4e9, 8e6, 4e6)
    assert nm.meets_deadline(d, t)
    assert not nm.meets_deadline(d, _task(ttl=2.19))
    uav = nm.UavState(0, energy=60e3, energy_min=50e3)
    e = nm.EnergyBreakdown(0.0, 4e3, 6e3)
    assert nm.battery_ok(uav, e)  # exactly at the reserve
    assert not nm.battery_ok(uav, nm.EnergyBreakdown(0.0, 4e3, 6e3 + 1e-6))


def test_state_invariants():
    with pytest.raises(nm.DomainError):
        nm.UavState(0, velocity=25.0)
    with pytest.raises(nm.DomainError):
        nm.UavState(0, altitude=0.0)
    with pytest.raises(nm.DomainError):
        nm.UavState(0, energy=1.0)
    with pytest.raises(nm.DomainError):
        nm.Task(0, 0, 1e6, 100, 10, urgency=1.5)
    with pytest.raises(nm.DomainError):
        nm.ChannelParams(pathloss_exp=1.0)
    with pytest.raises(nm.DomainError):
        nm.VehicleState(0, velocity=1.0, v_min=5.0)


def test_motion_and_coverage():
    u = nm.UavState(0, position=(0.0, 0.0), velocity=10.0)
    assert u.moved(2.0).position == pytest.approx((20.0, 0.0))
    v = nm.VehicleState(0, position=(0.0, 0.0), velocity=20.0)
    assert nm.still_covered(v, u, 5.0, 200.0)
    assert not nm.still_covered(v, u, 25.0, 200.0)
    assert nm.distance(u, v) == pytest.approx(50.0)


def test_leave_ratio_and_inflow():
    assert nm.vehicle_inflow(0.05, 10.0) == pytest.approx(0.5)
    assert nm.default_leave_ratio(10.0, 200.0) == pytest.approx(0.025)
    assert nm.default_leave_ratio(1e6, 200.0) == 1.0
