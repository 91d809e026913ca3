import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rescuesim import game, netmodel

P = game.GameParams()


def _ternary_max(f, lo, hi, iters=200):
    """Independent maximizer for a unimodal function (used as a second route to y*)."""
    for _ in range(iters):
        m1, m2 = lo + (hi - lo) / 3, hi - (hi - lo) / 3
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    return (lo + hi) / 2


# ---- payoffs ------------------------------------------------------------------


def test_vehicle_payoff_hand_value():
    p = P.with_(lambda_e=0.0)
    assert game.vehicle_payoff(4, 0.8, p) == pytest.approx(25.6 - 12.8)
    assert game.vehicle_payoff(0, 0.8, p) == 0.0


def test_vehicle_payoff_revenue_linear_in_y():
    p = P.with_(lambda_e=0.0)
    cost = p.lambda_c * p.psi * 16
    r1 = game.vehicle_payoff(4, 0.5, p) + cost
    r2 = game.vehicle_payoff(4, 1.0, p) + cost
    assert r2 == pytest.approx(2 * r1)


def test_vehicle_payoff_energy_term():
    p = P.with_(lambda_e=0.5, vehicle_energy=2.0)
    assert game.vehicle_payoff(4, 0.8, p) == pytest.approx(12.8 - 1.0)
    assert game.vehicle_payoff(4, 0.8, p, energy=4.0) == pytest.approx(12.8 - 2.0)


def test_uav_payoff_hand_value():
    assert game.uav_payoff(6, 0.3, P) == pytest.approx(81 * math.log(7) - 7.2)
    assert game.uav_payoff(0, 0.3, P) == 0.0
    assert game.uav_payoff([6, 6], [0.3, 0.3], P) == pytest.approx(2 * (81 * math.log(7) - 7.2))
    assert game.uav_payoff(6, 0.3, P.with_(phi=2.0)) == pytest.approx(81 * math.log(7) - 7.2 - 1.0)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 6), st.floats(0, 10), st.floats(0.01, 1))
def test_uav_payoff_decreasing_in_y(x, y, dy):
    assert game.uav_payoff(x, y + dy, P) < game.uav_payoff(x, y, P)


# ---- best response and equilibrium ----------------------------------------------------


def test_best_response_cases():
    p = P.with_(psi=4)
    assert p.threshold == pytest.approx(0.3)
    assert game.best_response_aocr(0.0, p) == 0.0
    assert game.best_response_aocr(0.3, p) == 6.0
    assert game.best_response_aocr(0.2, p) == pytest.approx(4.0)
    assert game.best_response_aocr(5.0, p) == 6.0


def test_optimal_payment_boundary_case():
    p = P.with_(psi=4, alpha=0.5)
    theta, _ = game.theta_omega(p)
    assert theta == pytest.approx(64.2)
    assert game.optimal_payment(p) == pytest.approx(0.3)
    eq = game.equilibrium(p)
    assert (eq.x, eq.y) == (pytest.approx(6.0), pytest.approx(0.3))


def test_optimal_payment_interior_case():
    p = P.with_(psi=16, alpha=0.1)
    theta, omega = game.theta_omega(p)
    assert theta == pytest.approx(-51.0)
    # varpi^2 lc^2 psi^2 + varpi lc psi rho alpha = 0.16 + 6.48
    assert omega == pytest.approx(6.64)
    assert game.optimal_payment(p) == pytest.approx(0.5442049, abs=1e-7)
    eq = game.equilibrium(p)
    assert eq.x == pytest.approx(2.7210247, abs=1e-7)
    assert eq.x == pytest.approx(p.lambda_p * eq.y / (2 * p.lambda_c * p.psi))
    assert game.printed_equilibrium_x(p) == pytest.approx(1.3605123, abs=1e-7)


def test_interior_payment_matches_direct_maximization():
    p = P.with_(psi=16, alpha=0.1)
    y_num = _ternary_max(lambda y: game.leader_objective(y, p), 1e-9, p.threshold)
    assert y_num == pytest.approx(game.optimal_payment(p), abs=1e-6)


def test_default_equilibrium():
    eq = game.equilibrium(P)
    assert (eq.x, eq.y) == (pytest.approx(6.0), pytest.approx(1.2))
    assert eq.participating


def test_zero_urgency_pays_nothing():
    p = P.with_(alpha=0.0)
    theta, omega = game.theta_omega(p)
    assert theta < 0
    assert math.sqrt(omega) == pytest.approx(p.varpi * p.lambda_c * p.psi)
    assert game.optimal_payment(p) == pytest.approx(0.0, abs=1e-12)
    assert not game.equilibrium(p).participating


def test_payment_cap_is_applied():
    p = P.with_(psi=16, alpha=1.0, rho=1e5, y_max=0.5)
    assert game.optimal_payment(p) == 0.5
    assert game.equilibrium(p).x == pytest.approx(game.best_response_aocr(0.5, p))


def test_large_cost_limits():
    xs = [game.equilibrium(P.with_(psi=v, alpha=0.5)) for v in (1e2, 1e4, 1e6)]
    assert xs[0].x > xs[1].x > xs[2].x
    assert xs[2].x < 1e-2
    # sqrt(c^2 + c k) - c -> k / 2, so the payment tends to rho alpha / (2 varpi lambda_p), not to zero
    assert xs[2].y == pytest.approx(P.rho * 0.5 / (2 * P.varpi * P.lambda_p), rel=1e-3)


def test_theta_zero_continuity():
    # alpha chosen so that Theta is exactly zero: the interior formula meets the threshold
    p = P.with_(psi=16)
    c = p.varpi * p.lambda_c * p.psi
    alpha0 = 4 * c * p.x_max * (1 + p.x_max) / p.rho
    p0 = p.with_(alpha=alpha0)
    _, omega = game.theta_omega(p0)
    interior = (math.sqrt(omega) - c) / (p.varpi * p.lambda_p)
    assert interior == pytest.approx(p.threshold, rel=1e-12)
    below = game.optimal_payment(p.with_(alpha=alpha0 * (1 - 1e-9)))
    assert below == pytest.approx(p.threshold, rel=1e-6)


def test_params_validation():
    with pytest.raises(ValueError):
        game.GameParams(varpi=0.0)
    with pytest.raises(ValueError):
        game.GameParams(alpha=1.5)
    with pytest.raises(ValueError):
        game.GameParams(psi=-1.0)
    with pytest.raises(ValueError):
        game.StrategyPair(-1.0, 0.0)


# ---- oracle and equilibrium conditions ------------------------------------------------------


def test_grid_oracle_default():
    r = game.grid_oracle(P)
    assert r.leader_gap <= r.resolution
    assert r.follower_cell_error <= 1.0
    assert r.y_hat == pytest.approx(1.2, abs=2 * r.dy)
    with pytest.raises(ValueError):
        game.grid_oracle(P, 50, 1000)


def test_grid_oracle_gap_shrinks_with_refinement():
    p = P.with_(psi=12, alpha=0.3)
    coarse = game.grid_oracle(p, 100, 100)
    fine = game.grid_oracle(p, 2000, 2000)
    assert fine.resolution < coarse.resolution
    assert abs(fine.leader_gap) <= abs(coarse.leader_gap) + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(4, 16), st.floats(0.1, 0.9))
def test_no_profitable_unilateral_deviation(psi, alpha):
    p = P.with_(psi=psi, alpha=alpha)
    eq = game.equilibrium(p)
    gain_v, gain_u = game.deviation_gain(eq, p, 2000)
    assert gain_v <= 1e-9
    # the leader's search is over a grid of the reduced objective; the closed form is the exact optimum
    assert gain_u <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(4, 16), st.floats(0.01, 11), st.floats(0.01, 5.99))
def test_follower_strictly_concave(psi, y, x):
    p = P.with_(psi=psi)
    h = 1e-3
    second = (game.follower_objective(x + h, y, p) - 2 * game.follower_objective(x, y, p)
              + game.follower_objective(x - h, y, p)) / h ** 2
    assert second == pytest.approx(-2 * p.lambda_c * psi, rel=1e-4)


@settings(max_examples=50, deadline=None)
@given(st.floats(4, 16), st.floats(0.1, 0.9), st.floats(0.01, 0.99))
def test_leader_concave_on_interior(psi, alpha, frac):
    p = P.with_(psi=psi, alpha=alpha)
    y = frac * p.threshold
    h = 1e-4 * p.threshold
    if y - h <= 0 or y + h >= p.threshold:
        return
    g1 = game.leader_grad(y - h, p)
    g2 = game.leader_grad(y + h, p)
    assert g2 < g1


def test_derivatives_match_finite_differences():
    rng = np.random.default_rng(3)
    for _ in range(200):
        p = P.with_(psi=rng.uniform(4, 16), alpha=rng.uniform(0.1, 0.9))
        x, y = rng.uniform(0.05, 5.95), rng.uniform(0.05, 10.95)
        h = 1e-6
        fd = (game.follower_objective(x + h, y, p) - game.follower_objective(x - h, y, p)) / (2 * h)
        assert game.follower_grad(x, y, p) == pytest.approx(fd, rel=1e-4, abs=1e-8)
        yl = rng.uniform(0.02, 0.98) * p.threshold
        fd = (game.leader_objective(yl + h, p) - game.leader_objective(yl - h, p)) / (2 * h)
        assert game.leader_grad(yl, p) == pytest.approx(fd, rel=1e-4)


def test_se_report_fields():
    rep = game.se_report(P.with_(psi=16, alpha=0.1))
    assert set(rep) >= {"theta", "omega", "x", "y", "x_printed", "uav_payoff", "vehicle_payoff"}
    assert rep["x_printed"] != pytest.approx(rep["x"])


# ---- physical side ---------------------------------------------------------------------


def _ctx():
    return game.OffloadContext(rate_a2g=8e6, rate_g2a=4e6)


def _task(ttl=10.0):
    return netmodel.Task(0, 0, 8e6, 100, ttl, 0.5)


def test_outcome_uses_ghz():
    d, e = game.outcome(_task(), 4.0, _ctx(), netmodel.UavState(0), netmodel.VehicleState(0))
    assert d.t_vfc == pytest.approx(0.2)
    assert e.e_vfc == pytest.approx(1.28)


def test_feasible():
    uav, veh = netmodel.UavState(0), netmodel.VehicleState(0)
    assert game.feasible(4.0, 1.0, _task(), _ctx(), uav, veh, P)
    # TTL below the upload time alone: no AoCR helps
    assert not game.feasible(6.0, 1.0, _task(ttl=0.9), _ctx(), uav, veh, P)
    assert not game.feasible(7.0, 1.0, _task(), _ctx(), uav, veh, P)
    assert not game.feasible(4.0, 12.0, _task(), _ctx(), uav, veh, P)
    assert not game.feasible(0.0, 1.0, _task(), _ctx(), uav, veh, P)


def test_feasible_battery_boundary():
    t, ctx, veh = _task(), _ctx(), netmodel.VehicleState(0)
    probe = netmodel.UavState(0)
    _, e = game.outcome(t, 4.0, ctx, probe, veh)
    need = e.e_fly + e.e_a2g
    at_reserve = netmodel.UavState(0, energy=50e3 + need, energy_min=50e3)
    assert game.feasible(4.0, 1.0, t, ctx, at_reserve, veh, P)
    short = netmodel.UavState(0, energy=50e3 + need * (1 - 1e-6), energy_min=50e3)
    assert not game.feasible(4.0, 1.0, t, ctx, short, veh, P)
