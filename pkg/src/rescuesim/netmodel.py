"""Physical-layer arithmetic for the UAV / ground-vehicle network.

Covers UAV propulsion power, the fluid traffic model for ground vehicles,
how many vehicles sit under a UAV's footprint, Shannon link rates and the
delay / energy bookkeeping of one offloaded task.

Units are SI throughout (meters, seconds, watts, joules, bits, Hz and
CPU cycles per second).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

GRAVITY = 9.8


class DomainError(ValueError):
    """An argument lies outside the domain of a physical formula."""


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass
class UavState:
    id: int
    position: tuple = (0.0, 0.0)
    altitude: float = 50.0
    velocity: float = 10.0
    acceleration: float = 2.0
    heading: float = 0.0  # radians, straight-line trajectory
    energy: float = 500e3
    capacity: float = 500e3
    energy_min: float = 50e3
    tx_power: float = 1.0
    bandwidth_dl: float = 0.5e6
    v_max: float = 20.0

    def __post_init__(self):
        if self.altitude <= 0:
            raise DomainError("UAV altitude must be positive")
        if not 0 <= self.velocity <= self.v_max:
            raise DomainError(f"UAV velocity {self.velocity} outside [0, {self.v_max}]")
        if not self.energy_min <= self.energy <= self.capacity:
            raise DomainError("UAV energy must lie in [reserve, capacity]")

    def moved(self, dt: float) -> "UavState":
        """Position after flying dt seconds along the current heading."""
        dx = self.velocity * dt * math.cos(self.heading)
        dy = self.velocity * dt * math.sin(self.heading)
        return replace(self, position=(self.position[0] + dx, self.position[1] + dy))


@dataclass
class VehicleState:
    id: int
    position: tuple = (0.0, 0.0)
    velocity: float = 10.0
    tx_power: float = 0.1
    bandwidth_ul: float = 10e6
    kappa: float = 1e-28
    unit_cost: float = 8.0
    x_max: float = 6e9
    v_min: float = 0.0
    v_max: float = float("inf")

    def __post_init__(self):
        if not self.v_min <= self.velocity <= self.v_max:
            raise DomainError(f"vehicle velocity {self.velocity} outside [{self.v_min}, {self.v_max}]")
        if self.x_max <= 0 or self.unit_cost <= 0:
            raise DomainError("vehicle x_max and unit_cost must be positive")

    def moved(self, dt: float) -> "VehicleState":
        return replace(self, position=(self.position[0] + self.velocity * dt, self.position[1]))


@dataclass(frozen=True)
class Task:
    owner: int
    index: int
    data_bits: float
    cycles_per_bit: float
    ttl: float
    urgency: float
    output_ratio: float = 0.5

    def __post_init__(self):
        if min(self.data_bits, self.cycles_per_bit, self.ttl) <= 0:
            raise DomainError("task size, cycles per bit and TTL must be positive")
        if not 0.0 <= self.urgency <= 1.0:
            raise DomainError("task urgency must lie in [0, 1]")
        if not 0.0 < self.output_ratio < 1.0:
            raise DomainError("task output ratio must lie in (0, 1)")


@dataclass
class ChannelParams:
    ref_gain: float = 1e-5  # -50 dB at the 1 m reference distance
    pathloss_exp: float = 2.0
    noise: float = 1e-13  # W/Hz in "psd" mode, W in "power" mode
    noise_mode: str = "psd"
    density: float = 0.05  # vehicles per meter
    density_max: float = 0.1
    v_min: float = 24 / 3.6
    v_max: float = 72 / 3.6
    a2a_bandwidth: float = 10e6
    a2a_power: float = 1.0
    leave_ratio: Sequence[float] | None = None

    def __post_init__(self):
        if self.pathloss_exp <= 1:
            raise DomainError("path-loss exponent must exceed 1")
        if not 0 <= self.density <= self.density_max:
            raise DomainError("traffic density outside [0, density_max]")
        if self.noise_mode not in ("psd", "power"):
            raise DomainError(f"unknown noise mode {self.noise_mode!r}")


def flying_power(v: float, a: float = 0.0, lam1: float = 0.0037, lam2: float = 5.0206,
                 hover_floor: float | None = None) -> float:
    """Propulsion power of a UAV flying at speed v with acceleration a.

    The model is singular at v = 0. Pass hover_floor to clamp slow speeds
    instead of raising.
    """
    if hover_floor is not None:
        v = max(v, hover_floor)
    if v <= 0:
        raise DomainError("flying power is undefined for v <= 0")
    return lam1 * v ** 3 + (lam2 / v) * (1.0 + a * a / GRAVITY ** 2)


def min_power_speed(a: float = 0.0, lam1: float = 0.0037, lam2: float = 5.0206) -> float:
    """Speed at which flying_power is smallest (its stationary point)."""
    return (lam2 * (1.0 + a * a / GRAVITY ** 2) / (3.0 * lam1)) ** 0.25


def average_vehicle_velocity(density: float, density_max: float, v_min: float, v_max: float) -> float:
    """Fluid traffic model: mean vehicle speed falls linearly with density."""
    if density < 0 or density > density_max:
        raise DomainError(f"density {density} outside [0, {density_max}]")
    return max(v_min, v_max * (1.0 - density / density_max))


def vehicle_inflow(density: float, mean_velocity: float, dt: float = 1.0) -> float:
    """Vehicles entering a coverage footprint during one slot."""
    return density * mean_velocity * dt


def default_leave_ratio(mean_velocity: float, coverage_radius: float, dt: float = 1.0) -> float:
    """Fraction of covered vehicles that drive out during one slot.

    A vehicle crossing a footprint of diameter 2R at speed v stays 2R/v
    seconds on average, so about v*dt/(2R) of the population leaves per slot.
    """
    return min(1.0, mean_velocity * dt / (2.0 * coverage_radius))


def coverage_count(inflow: Sequence[float], leave: Sequence[float]) -> np.ndarray:
    """Vehicles inside the footprint at each slot, given inflow and leave series."""
    inflow = np.asarray(inflow, dtype=float)
    leave = np.asarray(leave, dtype=float)
    if inflow.shape != leave.shape or inflow.ndim != 1 or len(inflow) == 0:
        raise DomainError("inflow and leave series must be equal-length, non-empty vectors")
    if np.any((leave < 0) | (leave > 1)):
        raise DomainError("leave ratios must lie in [0, 1]")
    out = np.empty_like(inflow)
    prev = 0.0
    for n in range(len(inflow)):
        prev = (inflow[n] + prev) * (1.0 - leave[n])
        out[n] = prev
    return out


def channel_gain(d: float, ref_gain: float, pathloss_exp: float) -> float:
    if d <= 0:
        raise DomainError("link distance must be positive")
    return ref_gain * d ** (-pathloss_exp)


def shannon_rate(d: float, bandwidth: float, power: float, ch: ChannelParams) -> float:
    """Achievable rate in bits/s over a free-space link of length d."""
    gain = channel_gain(d, ch.ref_gain, ch.pathloss_exp)
    noise = bandwidth * ch.noise if ch.noise_mode == "psd" else ch.noise
    return bandwidth * math.log2(1.0 + power * gain / noise)


def distance(uav: UavState, vehicle: VehicleState) -> float:
    dx = uav.position[0] - vehicle.position[0]
    dy = uav.position[1] - vehicle.position[1]
    return math.sqrt(dx * dx + dy * dy + uav.altitude ** 2)


def link_rates(d: float, ch: ChannelParams, uav: UavState, vehicle: VehicleState) -> tuple[float, float]:
    """(uplink vehicle->UAV, downlink UAV->vehicle) rates in bits/s."""
    up = shannon_rate(d, vehicle.bandwidth_ul, vehicle.tx_power, ch)
    down = shannon_rate(d, uav.bandwidth_dl, uav.tx_power, ch)
    return up, down


def a2a_rate(d: float, ch: ChannelParams) -> float:
    """UAV-to-UAV relay rate; same Shannon form as the downlink."""
    return shannon_rate(d, ch.a2a_bandwidth, ch.a2a_power, ch)


@dataclass(frozen=True)
class DelayBreakdown:
    t_a2g: float
    t_vfc: float
    t_g2a: float
    relayed: bool = False

    @property
    def total(self) -> float:
        return self.t_a2g + self.t_vfc + self.t_g2a


@dataclass(frozen=True)
class EnergyBreakdown:
    e_vfc: float
    e_a2g: float
    e_fly: float

    @property
    def uav_total(self) -> float:
        return self.e_a2g + self.e_fly


def offload_delay(task: Task, x: float, rate_a2g: float, rate_g2a: float,
                  in_coverage: bool = True, rate_g2a_relay: float | None = None,
                  rate_a2a: float | None = None) -> DelayBreakdown:
    """Upload, compute and result-return times for one task.

    If the vehicle has left the owner's footprint by the time the result is
    ready, the result goes up to a neighbour UAV (rate_g2a_relay) and is then
    relayed over the air-to-air link (rate_a2a).
    """
    if x <= 0 or rate_a2g <= 0 or rate_g2a <= 0:
        raise DomainError("compute rate and link rates must be positive")
    t_a2g = task.data_bits / rate_a2g
    t_vfc = task.cycles_per_bit * task.data_bits / x
    result_bits = task.output_ratio * task.data_bits
    if in_coverage:
        return DelayBreakdown(t_a2g, t_vfc, result_bits / rate_g2a)
    if not rate_g2a_relay or not rate_a2a:
        raise DomainError("relay case needs positive relay and air-to-air rates")
    return DelayBreakdown(t_a2g, t_vfc, result_bits / rate_g2a_relay + result_bits / rate_a2a, relayed=True)


def still_covered(vehicle: VehicleState, uav: UavState, elapsed: float, radius: float) -> bool:
    """Whether the vehicle is inside the UAV footprint after elapsed seconds."""
    v2 = vehicle.moved(elapsed)
    u2 = uav.moved(elapsed)
    dx = v2.position[0] - u2.position[0]
    dy = v2.position[1] - u2.position[1]
    return dx * dx + dy * dy <= radius * radius


def offload_energy(task: Task, x: float, delays: DelayBreakdown, uav: UavState,
                   vehicle: VehicleState, lam1: float = 0.0037, lam2: float = 5.0206,
                   hover_floor: float = 0.1) -> EnergyBreakdown:
    e_vfc = vehicle.kappa * task.cycles_per_bit * task.data_bits * x * x
    e_a2g = uav.tx_power * delays.t_a2g
    p_fly = flying_power(uav.velocity, uav.acceleration, lam1, lam2, hover_floor=hover_floor)
    return EnergyBreakdown(e_vfc, e_a2g, p_fly * delays.total)


def meets_deadline(delays: DelayBreakdown, task: Task) -> bool:
    return delays.total <= task.ttl


def battery_ok(uav: UavState, energy: EnergyBreakdown) -> bool:
    return uav.energy - energy.e_fly - energy.e_a2g >= uav.energy_min


@dataclass
class NetworkParams:
    """Scenario-level physical defaults."""
    n_uavs: int = 10
    n_vehicles: int = 200
    altitude: float = 50.0
    road_length: float = 2000.0
    r_a2a: float = 400.0
    r_a2g: float = 200.0
    slot: float = 1.0
    lam1: float = 0.0037
    lam2: float = 5.0206
    hover_floor: float = 0.1
    uav_accel: float = 2.0
    uav_v_max: float = 20.0
    uav_capacity: float = 500e3
    uav_tx_power: float = 1.0
    bandwidth_dl: float = 0.5e6
    vehicle_tx_power: float = 0.1
    bandwidth_ul: float = 10e6
    kappa: float = 1e-28
    channel: ChannelParams = field(default_factory=ChannelParams)
