"""Task offloading along the road: vehicular fog versus edge computing vehicles.

Geometry: UAVs hover over a straight road at fixed spacing; a few edge
computing vehicles (ECVs) are parked along it. Each UAV holds a batch of
tasks released at time 0.

With VFC, the vehicles under a UAV's footprint pool their equilibrium AoCR
for every task: the UAV uploads tasks one after another over its downlink,
the pool computes them first come first served (a task runs on every
vehicle at once, split in proportion to each vehicle's AoCR) and the results
come back over the uplink. Links are evaluated at the footprint's RMS
distance, so pool size only changes compute capacity. The number of covered vehicles comes from the
fluid traffic model, so it grows with density.

Without VFC, every UAV sends its tasks to the nearest ECV, and each ECV serves
the tasks of all its UAVs in arrival order with a fixed CPU.

Saved energy is the UAV's transmit plus flying energy without VFC minus the
same with VFC, per task.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import game, netmodel
from .config import DEFAULTS

OFFLOAD_DEFAULTS = DEFAULTS["offload"]


@dataclass
class OffloadPoint:
    density: float
    data_bits: float
    vehicles: float  # mean covered vehicles per UAV
    delay_vfc: float  # mean per-task delay (s)
    delay_ecv: float
    energy_vfc: float  # mean UAV energy per task (J)
    energy_ecv: float
    deadline_met: float  # share of VFC tasks within their TTL

    @property
    def saved_energy(self) -> float:
        return self.energy_ecv - self.energy_vfc

    def row(self) -> dict:
        return {"density": self.density, "data_bits": self.data_bits, "vehicles": self.vehicles,
                "delay_vfc": self.delay_vfc, "delay_ecv": self.delay_ecv, "energy_vfc": self.energy_vfc,
                "energy_ecv": self.energy_ecv, "saved_energy": self.saved_energy,
                "deadline_met": self.deadline_met}


def channel_from(net: dict) -> netmodel.ChannelParams:
    return netmodel.ChannelParams(
        ref_gain=netmodel.db_to_linear(net["ref_gain_db"]), pathloss_exp=net["pathloss_exp"],
        noise=netmodel.dbm_to_watts(net["noise_dbm"]), noise_mode=net["noise_mode"],
        density=net["density"], density_max=net["density_max"], v_min=net["v_min_gv"], v_max=net["v_max_gv"],
        a2a_bandwidth=net["a2a_bandwidth"], a2a_power=net["a2a_power"])


def covered_vehicles(density: float, net: dict, slots: int = 300) -> int:
    """Steady-state vehicle count under one footprint from the fluid traffic model."""
    v = netmodel.average_vehicle_velocity(density, net["density_max"], net["v_min_gv"], net["v_max_gv"])
    inflow = np.full(slots, netmodel.vehicle_inflow(density, v, net["slot"]))
    leave = np.full(slots, netmodel.default_leave_ratio(v, net["radius_a2g"], net["slot"]))
    return int(np.rint(netmodel.coverage_count(inflow, leave)[-1]))


def _rate(d_horizontal: float, bandwidth: float, power: float, net: dict, ch) -> float:
    return netmodel.shannon_rate(math.hypot(d_horizontal, net["altitude"]), bandwidth, power, ch)


def _tandem(upload: np.ndarray, service: np.ndarray, ret: np.ndarray, arrivals=None) -> np.ndarray:
    """Completion times: one sender uploads in order, one server computes FIFO."""
    done_up = np.cumsum(upload) if arrivals is None else arrivals
    free = 0.0
    out = np.empty(len(service))
    for k in range(len(service)):
        start = max(done_up[k], free)
        free = start + service[k]
        out[k] = free + ret[k]
    return out


def _draw(rng: np.random.Generator, cfg: dict, n_uavs: int, max_vehicles: int):
    g = cfg["game"]
    tasks = []
    for _ in range(n_uavs):
        k = int(rng.integers(g["tasks_range"][0], g["tasks_range"][1] + 1))
        tasks.append({"cycles": rng.uniform(*g["cycles_range"], size=k),
                      "alpha": rng.uniform(*g["alpha_range"], size=k)})
    # vehicles are drawn in a fixed order so that a denser road sees a superset
    psi = rng.uniform(*g["psi_range"], size=(n_uavs, max_vehicles))
    return tasks, psi


def _aocr(psi: float, alpha: float, base: game.GameParams) -> float:
    return game.equilibrium(base.with_(psi=float(psi), alpha=float(alpha))).x * game.GHZ


def run_offload(cfg: dict, off: dict | None = None, seed: int = 0) -> list[OffloadPoint]:
    """One OffloadPoint per (density, data size), averaged over UAVs and seeds."""
    off = {**OFFLOAD_DEFAULTS, **cfg.get("offload", {}), **(off or {})}
    net, g = cfg["network"], cfg["game"]
    ch = channel_from(net)
    base = game.GameParams(**{k: g[k] for k in ("rho", "varpi", "lambda_p", "lambda_c", "lambda_e", "psi",
                                                 "alpha", "x_max", "y_max")})
    n_uavs = int(net["uavs"])
    spacing = off["road_length"] / n_uavs
    uav_x = spacing / 2 + spacing * np.arange(n_uavs)
    ecvs = np.asarray(off["ecv_positions"], dtype=float)
    home = np.argmin(np.abs(uav_x[:, None] - ecvs[None, :]), axis=1)
    counts = {d: max(1, covered_vehicles(d, net, off["warmup_slots"])) for d in off["densities"]}
    p_fly = netmodel.flying_power(net["uav_speed"], net["uav_accel"], net["lam1"], net["lam2"],
                                  hover_floor=net["hover_floor"])
    p_tx = net["uav_tx_power"]
    ttl = g["ttl"]
    # mean-field links: every pool member sits at the RMS horizontal distance of a
    # uniform footprint, so pool size changes compute capacity and nothing else
    rms = net["radius_a2g"] / math.sqrt(2.0)
    r_dn = _rate(rms, net["bandwidth_dl"], p_tx, net, ch)
    r_up = _rate(rms, net["bandwidth_ul"], net["vehicle_tx_power"], net, ch)
    acc = {(d, D): np.zeros(6) for d in off["densities"] for D in off["data_sizes"]}
    for s in range(int(off["seeds"])):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), s, 0x0FF]))
        tasks, psi = _draw(rng, cfg, n_uavs, max(counts.values()))
        x = [np.array([[_aocr(psi[j, i], a, base) for i in range(psi.shape[1])] for a in tasks[j]["alpha"]])
             for j in range(n_uavs)]
        for D in off["data_sizes"]:
            # without VFC: all UAVs share their ECV
            ecv_delay, ecv_energy = [], []
            for e in range(len(ecvs)):
                mine = [j for j in range(n_uavs) if home[j] == e]
                arr, work, ret, tx = [], [], [], []
                for j in mine:
                    h = abs(uav_x[j] - ecvs[e])
                    up = D / _rate(h, net["bandwidth_dl"], p_tx, net, ch)
                    back = off["output_ratio"] * D / _rate(h, net["bandwidth_ul"], net["vehicle_tx_power"], net, ch)
                    k = len(tasks[j]["cycles"])
                    arr.append(up * np.arange(1, k + 1))
                    work.append(tasks[j]["cycles"] * D / off["ecv_cpu"])
                    ret.append(np.full(k, back))
                    tx.append(np.full(k, up))
                arr, work, ret, tx = map(np.concatenate, (arr, work, ret, tx))
                order = np.argsort(arr, kind="stable")
                done = np.empty_like(arr)
                done[order] = _tandem(None, work[order], ret[order], arrivals=arr[order])
                ecv_delay.append(done)
                ecv_energy.append(p_tx * tx + p_fly * done)
            ecv_delay = np.concatenate(ecv_delay)
            ecv_energy = np.concatenate(ecv_energy)
            for d in off["densities"]:
                n = counts[d]
                delays, energy = [], []
                for j in range(n_uavs):
                    xs = x[j][:, :n]  # (tasks, vehicles)
                    work = tasks[j]["cycles"] * D / xs.sum(axis=1)
                    up = np.full(len(work), D / r_dn)
                    back = np.full(len(work), off["output_ratio"] * D / r_up)
                    done = _tandem(up, work, back)
                    delays.append(done)
                    energy.append(p_tx * up + p_fly * done)
                delays = np.concatenate(delays)
                energy = np.concatenate(energy)
                acc[(d, D)] += [n, delays.mean(), ecv_delay.mean(), energy.mean(), ecv_energy.mean(),
                                float(np.mean(delays <= ttl))]
    seeds = int(off["seeds"])
    return [OffloadPoint(float(d), float(D), *(float(v) for v in acc[(d, D)] / seeds))
            for d in off["densities"] for D in off["data_sizes"]]


def trend_holds(points: list[OffloadPoint]) -> dict:
    """Per data size: delay strictly falls and saved energy strictly rises with density."""
    out = {}
    for D in sorted({p.data_bits for p in points}):
        row = sorted((p for p in points if p.data_bits == D), key=lambda p: p.density)
        delay = [p.delay_vfc for p in row]
        saved = [p.saved_energy for p in row]
        out[D] = (all(a > b for a, b in zip(delay, delay[1:])), all(a < b for a, b in zip(saved, saved[1:])))
    return out
