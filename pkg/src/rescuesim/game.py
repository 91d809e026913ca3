"""Static UAV/vehicle pricing game.

One UAV (leader) posts a unit payment y for a task; one vehicle (follower)
answers with an amount of computing resource x. Units: x in GHz, y in cents.
Pairs (vehicle, task) are independent, so every function works on a single
pair and broadcasts over numpy arrays where that makes sense.

The closed forms treat the delay term phi and the vehicle's energy term as
constants with respect to x, which is also how the derivations handle them.
`grid_oracle` brute-forces the same reduced game as an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import netmodel

GHZ = 1e9


@dataclass(frozen=True)
class GameParams:
    rho: float = 162.0  # UAV satisfaction parameter
    varpi: float = 0.5  # weight of payment against delay in the UAV cost
    lambda_p: float = 8.0
    lambda_c: float = 0.05
    lambda_e: float = 0.01
    psi: float = 16.0  # vehicle unit compute cost
    alpha: float = 0.5  # task urgency
    x_max: float = 6.0  # GHz
    y_max: float = 11.0  # cents
    phi: float = 0.0  # task delay (s), constant in the closed forms
    vehicle_energy: float = 0.0  # E_vfc + P_tx * t_g2a (J), constant in the closed forms

    def __post_init__(self):
        for name in ("rho", "lambda_p", "lambda_c", "psi", "x_max", "y_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.varpi <= 1:
            raise ValueError("varpi must lie in (0, 1]")
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.lambda_e < 0 or self.phi < 0 or self.vehicle_energy < 0:
            raise ValueError("lambda_e, phi and vehicle_energy must be non-negative")

    def with_(self, **kw) -> "GameParams":
        return replace(self, **kw)

    @property
    def threshold(self) -> float:
        """Smallest payment at which the vehicle contributes everything it has."""
        return 2 * self.lambda_c * self.psi * self.x_max / self.lambda_p


@dataclass(frozen=True)
class StrategyPair:
    x: float
    y: float
    participating: bool = True

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError("strategies are non-negative")


# ---- payoffs ------------------------------------------------------------------------


def vehicle_payoff(x, y, p: GameParams, energy=None):
    """Payment received minus quadratic resource cost and weighted energy.

    x = 0 means the vehicle stays out (payoff 0): execution time is
    unbounded there, so the energy term is not defined.
    """
    x = np.asarray(x, dtype=float)
    e = p.vehicle_energy if energy is None else energy
    val = p.lambda_p * y * x - (p.lambda_c * p.psi * x * x + p.lambda_e * e)
    out = np.where(x > 0, val, 0.0)
    return float(out) if out.ndim == 0 else out


def uav_payoff(x, y, p: GameParams, phi=None):
    """Sum over pairs of satisfaction minus weighted payment and delay; pairs with x = 0 contribute 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    f = p.phi if phi is None else np.asarray(phi, dtype=float)
    val = p.rho * p.alpha * np.log1p(x) - (p.varpi * p.lambda_p * y * x + (1 - p.varpi) * f)
    return float(np.sum(np.where(x > 0, val, 0.0)))


# ---- physical side --------------------------------------------------------------------


@dataclass(frozen=True)
class OffloadContext:
    """Link rates and geometry needed to turn (x, task) into delay and energy."""
    rate_a2g: float
    rate_g2a: float
    in_coverage: bool = True
    rate_g2a_relay: float | None = None
    rate_a2a: float | None = None


def outcome(task: netmodel.Task, x: float, ctx: OffloadContext, uav: netmodel.UavState,
            vehicle: netmodel.VehicleState, lam1: float = 0.0037, lam2: float = 5.0206):
    """Delay and energy of serving `task` with x GHz."""
    d = netmodel.offload_delay(task, x * GHZ, ctx.rate_a2g, ctx.rate_g2a, ctx.in_coverage,
                               ctx.rate_g2a_relay, ctx.rate_a2a)
    e = netmodel.offload_energy(task, x * GHZ, d, uav, vehicle, lam1, lam2)
    return d, e


def vehicle_energy(task, delays: netmodel.DelayBreakdown, energy: netmodel.EnergyBreakdown,
                   vehicle: netmodel.VehicleState) -> float:
    return energy.e_vfc + vehicle.tx_power * delays.t_g2a


def feasible(x: float, y: float, task: netmodel.Task, ctx: OffloadContext, uav: netmodel.UavState,
             vehicle: netmodel.VehicleState, p: GameParams) -> bool:
    """Deadline, battery reserve and strategy bounds."""
    if not (0 <= y <= p.y_max and 0 <= x <= p.x_max):
        return False
    if task.data_bits / ctx.rate_a2g > task.ttl:
        return False
    if x <= 0:
        return False
    d, e = outcome(task, x, ctx, uav, vehicle)
    return netmodel.meets_deadline(d, task) and netmodel.battery_ok(uav, e)


# ---- closed forms -----------------------------------------------------------------------


def best_response_aocr(y: float, p: GameParams) -> float:
    if y <= 0:
        return 0.0
    if y >= p.threshold or math.isclose(y, p.threshold, rel_tol=1e-12):
        return p.x_max
    return p.lambda_p * y / (2 * p.lambda_c * p.psi)


def theta_omega(p: GameParams) -> tuple[float, float]:
    c = p.varpi * p.lambda_c * p.psi
    theta = p.rho * p.alpha - 4 * c * p.x_max * (1 + p.x_max)
    omega = c * c + c * p.rho * p.alpha
    return theta, omega


def optimal_payment(p: GameParams) -> float:
    theta, omega = theta_omega(p)
    if theta >= 0:
        y = p.threshold
    else:
        c = p.varpi * p.lambda_c * p.psi
        y = (math.sqrt(omega) - c) / (p.varpi * p.lambda_p)
    # the payment cap is binding only if the unconstrained optimum lies above it;
    # the reduced objective is concave so the cap itself is then optimal
    return float(min(max(y, 0.0), p.y_max))


def equilibrium(p: GameParams) -> StrategyPair:
    y = optimal_payment(p)
    x = best_response_aocr(y, p)
    return StrategyPair(x, y, x > 0)


def printed_equilibrium_x(p: GameParams) -> float:
    """The AoCR value as the published closed form writes it (without the varpi factor).

    Kept for side-by-side reporting; `equilibrium` composes the two best
    responses instead, which is what the follower actually plays.
    """
    theta, omega = theta_omega(p)
    if theta >= 0:
        return p.x_max
    return (math.sqrt(omega) - p.varpi * p.lambda_c * p.psi) / (2 * p.lambda_c * p.psi)


def se_report(p: GameParams) -> dict:
    eq = equilibrium(p)
    theta, omega = theta_omega(p)
    return {
        "psi": p.psi, "alpha": p.alpha, "theta": theta, "omega": omega,
        "x": eq.x, "y": eq.y, "x_printed": printed_equilibrium_x(p),
        "uav_payoff": uav_payoff(eq.x, eq.y, p), "vehicle_payoff": vehicle_payoff(eq.x, eq.y, p),
    }


# ---- reduced objectives and their derivatives ------------------------------------------------


def follower_objective(x, y, p: GameParams):
    """Vehicle payoff for x > 0 as a smooth function of x."""
    return p.lambda_p * y * x - p.lambda_c * p.psi * x * x - p.lambda_e * p.vehicle_energy


def follower_grad(x, y, p: GameParams):
    return p.lambda_p * y - 2 * p.lambda_c * p.psi * x


def leader_objective(y, p: GameParams):
    """UAV payoff when the vehicle plays its best response to y (0 < y)."""
    y = np.asarray(y, dtype=float)
    k = p.lambda_p / (2 * p.lambda_c * p.psi)
    x = np.minimum(k * y, p.x_max)
    out = p.rho * p.alpha * np.log1p(x) - p.varpi * p.lambda_p * y * x - (1 - p.varpi) * p.phi
    return float(out) if out.ndim == 0 else out


def leader_grad(y, p: GameParams):
    """d/dy of `leader_objective`; undefined exactly at the threshold kink."""
    y = np.asarray(y, dtype=float)
    lc = p.lambda_c * p.psi
    inner = p.rho * p.alpha * p.lambda_p / (2 * lc + p.lambda_p * y) - p.varpi * p.lambda_p ** 2 * y / lc
    outer = -p.varpi * p.lambda_p * p.x_max + 0 * y
    out = np.where(y < p.threshold, inner, outer)
    return float(out) if out.ndim == 0 else out


# ---- brute force ---------------------------------------------------------------------------------


@dataclass
class GridResult:
    x_hat: float  # follower grid response at y_hat
    y_hat: float
    leader_best: float  # best leader payoff found on the grid
    leader_closed: float  # leader payoff at the closed-form equilibrium
    leader_gap: float  # leader_best - leader_closed (<= resolution when the closed form is right)
    follower_cell_error: float  # |grid BR - closed-form BR| at y*, in grid cells
    resolution: float  # slope bound times grid steps
    dx: float
    dy: float


def grid_oracle(p: GameParams, nx: int = 1000, ny: int = 1000) -> GridResult:
    """Backward induction on a grid: follower argmax per y, then leader argmax over y."""
    if nx < 100 or ny < 100:
        raise ValueError("grid sizes must be at least 100 per axis")
    xs = np.linspace(0.0, p.x_max, nx)
    ys = np.linspace(0.0, p.y_max, ny)
    dx, dy = xs[1] - xs[0], ys[1] - ys[0]
    # follower: payoff matrix over (y, x); column 0 is non-participation
    fol = p.lambda_p * ys[:, None] * xs[None, :] - p.lambda_c * p.psi * xs[None, :] ** 2
    fol[:, 1:] -= p.lambda_e * p.vehicle_energy
    fol[:, 0] = 0.0
    br = xs[np.argmax(fol, axis=1)]
    lead = np.where(br > 0, p.rho * p.alpha * np.log1p(br) - p.varpi * p.lambda_p * ys * br
                    - (1 - p.varpi) * p.phi, 0.0)
    j = int(np.argmax(lead))
    eq = equilibrium(p)
    closed = uav_payoff(eq.x, eq.y, p)
    # grid BR at the closed-form payment itself
    fy = p.lambda_p * eq.y * xs - p.lambda_c * p.psi * xs ** 2
    fy[1:] -= p.lambda_e * p.vehicle_energy
    fy[0] = 0.0
    x_grid_at_star = xs[int(np.argmax(fy))]
    # Lipschitz bounds of the leader payoff in x and in y over the box
    lx = p.rho * p.alpha + p.varpi * p.lambda_p * p.y_max
    ly = p.varpi * p.lambda_p * p.x_max
    return GridResult(float(br[j]), float(ys[j]), float(lead[j]), closed, float(lead[j] - closed),
                      abs(x_grid_at_star - eq.x) / dx, 2 * (lx * dx + ly * dy), float(dx), float(dy))


def deviation_gain(eq: StrategyPair, p: GameParams, n: int = 1000) -> tuple[float, float]:
    """Largest payoff gain either player gets by deviating alone on an n-point grid."""
    xs = np.linspace(0.0, p.x_max, n)
    ys = np.linspace(0.0, p.y_max, n)
    v0 = vehicle_payoff(eq.x, eq.y, p)
    gain_v = float(np.max(vehicle_payoff(xs, eq.y, p)) - v0)
    u0 = uav_payoff(eq.x, eq.y, p)
    resp = np.array([best_response_aocr(y, p) for y in ys])
    gain_u = float(np.max(leader_objective(ys, p)[resp > 0], initial=0.0) - u0)
    return gain_v, gain_u
