"""Scenario configuration: defaults, JSON loading, dotted overrides, checks.

A scenario is a JSON document with the sections network, consensus,
reputation, game, learning, adversary, offload and seeds. Anything missing falls
back to DEFAULTS; any key not present in DEFAULTS is an error.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

from ..consensus.committee import ConfigError

SCHEMES = ("proposal", "art", "naive")
BEHAVIOURS = ("cp", "cv", "vol", "nbc", "wbc", "spoofing", "collusion")

DEFAULTS = {
    "network": {
        "full_nodes": 10,
        "delta": 1.0,  # post-GST propagation bound (s)
        "delta_min": 0.01,
        "gst": 0.0,
        "pre_gst_factor": 10.0,
        "drop_prob": 0.0,
        "bandwidth": 100e6,  # bits/s per sender link
        "verify_time": 2e-4,  # seconds per signature check
        "slot": 1.0,  # reputation / mobility slot length (s)
        # physical layer, used by the offloading experiments
        "uavs": 10,
        "vehicles": 200,
        "altitude": 50.0,
        "uav_speed": 10.0,
        "uav_accel": 2.0,
        "v_max_uav": 20.0,
        "uav_tx_power": 1.0,
        "uav_rx_power": 0.1,
        "vehicle_tx_power": 0.1,
        "bandwidth_ul": 10e6,
        "bandwidth_dl": 0.5e6,
        "ref_gain_db": -50.0,
        "noise_dbm": -100.0,
        "noise_mode": "psd",
        "pathloss_exp": 2.0,
        "kappa": 1e-28,
        "lam1": 0.0037,
        "lam2": 5.0206,
        "capacity": 500e3,
        "energy_min": 50e3,
        "radius_a2a": 400.0,
        "radius_a2g": 200.0,
        "v_min_gv": 24 / 3.6,
        "v_max_gv": 72 / 3.6,
        "density": 0.05,  # vehicles per meter
        "density_max": 0.2,
        "hover_floor": 0.1,
        "a2a_bandwidth": 10e6,
        "a2a_power": 1.0,
    },
    "consensus": {
        "scheme": "proposal",
        "z": 10,
        "psi": 7,
        "heights": 100,
        "max_time": 1e6,
        "propose_timeout": 6.0,
        "timeout_increment": 0.5,
        "prevote_timeout": 3.0,
        "precommit_timeout": 3.0,
        "commit_wait": 0.001,
        "sync_delay": 2.0,
        "chunk_size": 65536,
        "block_txs": 0,
        "tx_pool": 2000,
        "election_every": 10,
        "aggregate_last_commit": True,
        "record_last_votes": True,
        "backend": "sim",
        "trace": False,
        "e_tx": 1e-7,  # J per byte sent
        "e_verify": 1e-3,  # J per signature check
    },
    "reputation": {
        "eta": 0.5,
        "initial": 3.0,
        "deltas": {"sbc": 4.0, "sbv": 2.0, "cp": 5.0, "cv": 3.0, "wbc": 5.0, "nbc": 1.5, "vol": 3.0,
                   "rep-informer": 1.5, "rep-accused": 2.5},
        "forensics": True,
        "forensic_delay": 3.0,
        "informers": 3,
        "report_fee": 1.0,
        "min_timeouts": 1,
        "max_reports_per_block": 64,
    },
    "game": {
        "rho": 162.0,
        "varpi": 0.5,
        "lambda_p": 8.0,
        "lambda_c": 0.05,
        "lambda_e": 0.01,
        "psi": 16.0,
        "psi_range": [4.0, 16.0],
        "alpha": 0.5,
        "alpha_range": [0.1, 0.9],
        "x_max": 6.0,  # GHz
        "y_max": 11.0,  # cents
        "data_bits_range": [1e6, 10e6],
        "cycles_range": [100.0, 200.0],
        "tasks_range": [10, 20],
        "ttl": 10.0,
    },
    "learning": {
        "scheme": "dqn",
        "slots": 9000,
        "discount": 0.8,
        "eps_uav": 0.92,
        "eps_vehicle": 0.95,
        "window": 11,
        "updates": 4,
        "memory": 1000,
        "levels_uav": 22,
        "levels_vehicle": 12,
        "lr": 1e-3,
        "batch": 1,
        "optimizer": "sgd",  # sgd | adam
        "reward_scale": 0.01,  # UAV payoffs are ~100 cents
        "reward_scale_vehicle": 0.05,  # vehicle payoffs are ~20 cents
        "grad_clip": 10.0,
        "vehicles": 1,
        "tail": 500,
        "checkpoint_every": 0,
        "output_relu": False,
        "tabular_lr": 0.1,
        "vehicle_state": "current",  # current | previous: which payment the vehicle decides on
    },
    "adversary": {
        "byzantine_ratio": 0.0,
        "byzantine": [],  # explicit ids, overrides the ratio
        "behavior": [],
        "placement": "random",  # random | first
        "switch_time": 0.0,
        "cv_split": 0.5,
        "cv_mode": "split",  # split | lite
        "spoof_leader": "nbc",  # what a switched spoofer does as leader: nbc | wbc
        "colluder": None,
        "strict_safety": False,
        "partition": {"ratio": 0.0, "start": 0.0, "end": 0.0, "byzantine_share": 0.0},
    },
    "offload": {
        "densities": [0.01, 0.02, 0.04],  # vehicles per meter
        "data_sizes": [2e6, 4e6, 6e6, 8e6],  # bits
        "road_length": 2000.0,
        "ecv_positions": [500.0, 1500.0],
        "ecv_cpu": 20e9,  # cycles/s per ECV
        "output_ratio": 0.5,
        "warmup_slots": 300,
        "seeds": 5,
    },
    "seeds": {"master": 0},
}


def deep_merge(base: dict, update: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in update.items():
        where = f"{path}.{k}" if path else k
        if k not in out:
            raise ConfigError(f"unknown config key '{where}'")
        if isinstance(out[k], dict) and k != "deltas":
            if not isinstance(v, dict):
                raise ConfigError(f"'{where}' must be an object")
            out[k] = deep_merge(out[k], v, where)
        elif isinstance(out[k], dict):
            if not isinstance(v, dict) or not set(v) <= set(out[k]):
                raise ConfigError(f"'{where}' has unknown behaviours")
            out[k] = {**out[k], **v}
        else:
            out[k] = v
    return out


def parse_value(text: str):
    """Override values are JSON when they parse as JSON, plain strings otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, overrides) -> dict:
    """Apply 'section.key=value' strings (nested keys use more dots)."""
    cfg = copy.deepcopy(cfg)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        node = cfg
        for p in parts[:-1]:
            if not isinstance(node, dict) or p not in node:
                raise ConfigError(f"unknown config key '{key}'")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(f"unknown config key '{key}'")
        node[parts[-1]] = parse_value(text)
    return cfg


def load_config(path=None, overrides=None, base: dict | None = None) -> dict:
    cfg = copy.deepcopy(base or DEFAULTS)
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{p}: top level must be an object")
        cfg = deep_merge(cfg, doc)
    cfg = apply_overrides(cfg, overrides)
    validate_config(cfg)
    return cfg


def _ratio(name, v):
    if not isinstance(v, (int, float)) or not 0.0 <= v <= 1.0:
        raise ConfigError(f"{name}={v!r} must be a ratio in [0, 1]")


def max_byzantine(z: int) -> int:
    return (z - 1) // 3


def validate_config(cfg: dict):
    net, con, adv = cfg["network"], cfg["consensus"], cfg["adversary"]
    if con["scheme"] not in SCHEMES:
        raise ConfigError(f"consensus.scheme must be one of {SCHEMES}, got {con['scheme']!r}")
    u, z, psi = net["full_nodes"], con["z"], con["psi"]
    if not (isinstance(u, int) and isinstance(z, int) and isinstance(psi, int)):
        raise ConfigError("full_nodes, z and psi must be integers")
    if con["scheme"] != "naive":
        if z < 1 or z > u:
            raise ConfigError(f"consensus.z={z} must lie in [1, full_nodes={u}]")
        if not 1 <= psi <= z:
            raise ConfigError(f"consensus.psi={psi} must lie in [1, z={z}]")
    if not 0 < net["delta_min"] <= net["delta"]:
        raise ConfigError("need 0 < network.delta_min <= network.delta")
    for k in ("drop_prob",):
        _ratio(f"network.{k}", net[k])
    _ratio("adversary.byzantine_ratio", adv["byzantine_ratio"])
    _ratio("adversary.cv_split", adv["cv_split"])
    part = adv["partition"]
    _ratio("adversary.partition.ratio", part["ratio"])
    _ratio("adversary.partition.byzantine_share", part["byzantine_share"])
    if part["end"] < part["start"]:
        raise ConfigError("adversary.partition.end precedes start")
    for b in adv["behavior"]:
        if b not in BEHAVIOURS:
            raise ConfigError(f"unknown adversary behaviour {b!r}; choose from {BEHAVIOURS}")
    if adv["placement"] not in ("random", "first"):
        raise ConfigError("adversary.placement must be 'random' or 'first'")
    if adv["cv_mode"] not in ("split", "lite"):
        raise ConfigError("adversary.cv_mode must be 'split' or 'lite'")
    if adv["spoof_leader"] not in ("nbc", "wbc"):
        raise ConfigError("adversary.spoof_leader must be 'nbc' or 'wbc'")
    for b in adv["byzantine"]:
        if not isinstance(b, int) or not 0 <= b < u:
            raise ConfigError(f"byzantine id {b!r} is not a full node")
    if adv["strict_safety"]:
        zz = u if con["scheme"] == "naive" else z
        n_byz = len(adv["byzantine"]) or math.floor(adv["byzantine_ratio"] * u + 1e-9)
        ratio = n_byz / zz if adv["byzantine"] else adv["byzantine_ratio"]
        bound = max_byzantine(zz) / zz
        if ratio > bound + 1e-12:
            raise ConfigError(f"Byzantine ratio {ratio:.3f} exceeds the safety bound "
                              f"floor((Z-1)/3)/Z = {bound:.3f} for Z={zz}")
    rep = cfg["reputation"]
    if rep["eta"] < 0:
        raise ConfigError("reputation.eta must be non-negative")
    lr = cfg["learning"]
    if lr["scheme"] not in ("dqn", "qlearn", "greedy"):
        raise ConfigError("learning.scheme must be dqn, qlearn or greedy")
    for k in ("eps_uav", "eps_vehicle"):
        _ratio(f"learning.{k}", lr[k])
    g = cfg["game"]
    if not 0 < g["varpi"] <= 1:
        raise ConfigError("game.varpi must lie in (0, 1]")
    for k in ("rho", "lambda_p", "lambda_c", "psi", "x_max", "y_max"):
        if g[k] <= 0:
            raise ConfigError(f"game.{k} must be positive")
    _ratio("game.alpha", g["alpha"])
    off = cfg["offload"]
    if not off["densities"] or any(d <= 0 or d > net["density_max"] for d in off["densities"]):
        raise ConfigError(f"offload.densities must lie in (0, network.density_max={net['density_max']}]")
    if not off["data_sizes"] or any(d <= 0 for d in off["data_sizes"]):
        raise ConfigError("offload.data_sizes must be positive")
    if not off["ecv_positions"] or any(not 0 <= p <= off["road_length"] for p in off["ecv_positions"]):
        raise ConfigError("offload.ecv_positions must lie on the road")
    for k in ("road_length", "ecv_cpu"):
        if off[k] <= 0:
            raise ConfigError(f"offload.{k} must be positive")
    _ratio("offload.output_ratio", off["output_ratio"])
    if int(off["seeds"]) < 1:
        raise ConfigError("offload.seeds must be at least 1")


@dataclass
class Scenario:
    """A validated configuration with scheme presets applied."""
    config: dict
    seed: int

    @property
    def network(self):
        return self.config["network"]

    @property
    def consensus(self):
        return self.config["consensus"]

    @property
    def reputation(self):
        return self.config["reputation"]

    @property
    def adversary(self):
        return self.config["adversary"]

    @property
    def scheme(self) -> str:
        return self.consensus["scheme"]


def load_scenario(config=None, overrides=None, seed: int | None = None) -> Scenario:
    """Build a Scenario from a path, a dict (merged over defaults) or None."""
    if config is None or isinstance(config, (str, Path)):
        cfg = load_config(config, overrides)
    else:
        cfg = apply_overrides(deep_merge(DEFAULTS, config), overrides)
        validate_config(cfg)
    if seed is not None:
        cfg["seeds"]["master"] = int(seed)
    scheme = cfg["consensus"]["scheme"]
    if scheme == "art":
        cfg["reputation"]["eta"] = 0.0
        cfg["consensus"]["psi"] = cfg["consensus"]["z"]
    elif scheme == "naive":
        u = cfg["network"]["full_nodes"]
        cfg["consensus"]["z"] = cfg["consensus"]["psi"] = u
        cfg["consensus"]["aggregate_last_commit"] = False
        cfg["reputation"]["forensics"] = False
    validate_config(cfg)
    return Scenario(cfg, int(cfg["seeds"]["master"]))
