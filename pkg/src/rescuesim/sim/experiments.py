"""Parameter sweeps that regenerate each figure family as rows of plain dicts.

Every sweep takes a `base` config dict (merged over DEFAULTS) so callers can
change the setting without touching the sweep itself.
"""
from __future__ import annotations

import copy
import math

import numpy as np

from .. import game
from .config import DEFAULTS, deep_merge
from .engine import run_scenario
from .offload import run_offload

# rounds-to-commit under spoofing: 20 full nodes, committee of 10, switch at 70 s
SPOOFING_SETUP = {
    "network": {"full_nodes": 20},
    "consensus": {"z": 10, "psi": 7, "heights": 150},
    "adversary": {"behavior": ["spoofing"], "placement": "first", "switch_time": 70.0, "spoof_leader": "nbc"},
}
BLOCK_SETUP = {"consensus": {"z": 10, "psi": 7, "heights": 20}, "network": {"delta": 0.1, "delta_min": 0.01}}


def _merge(*docs) -> dict:
    out: dict = {}
    for d in docs:
        if d:
            out = _deep_update(out, d)
    return out


def _deep_update(a: dict, b: dict) -> dict:
    out = copy.deepcopy(a)
    for k, v in b.items():
        out[k] = _deep_update(out.get(k, {}), v) if isinstance(v, dict) and k != "deltas" else v
    return out


def _stderr(xs) -> float:
    xs = np.asarray(xs, dtype=float)
    return float(xs.std(ddof=1) / math.sqrt(len(xs))) if len(xs) > 1 else 0.0


def psi_for(z: int) -> int:
    return max(1, int(round(0.7 * z)))


def rounds_vs_pb(values, schemes=("proposal", "art", "naive"), seeds=range(10), base=None) -> list[dict]:
    """Mean rounds-to-commit after the spoofing switch, one row per (P_b, scheme)."""
    rows = []
    base = _merge(SPOOFING_SETUP, base)
    switch = base["adversary"]["switch_time"]
    for pb in values:
        for scheme in schemes:
            per_seed = []
            for s in seeds:
                cfg = _merge(base, {"consensus": {"scheme": scheme}, "adversary": {"byzantine_ratio": float(pb)}})
                m, _ = run_scenario(cfg, seed=s)
                per_seed.append(m.mean_rounds(after_time=switch))
            rows.append({"pb": float(pb), "scheme": scheme, "mean_rounds": float(np.mean(per_seed)),
                         "stderr": _stderr(per_seed), "seeds": per_seed})
    return rows


def seed_orderings(rows: list[dict], order=("proposal", "art", "naive")) -> dict:
    """Per P_b, how many seeds satisfy rounds(order[0]) <= rounds(order[1]) <= ..."""
    out = {}
    for pb in sorted({r["pb"] for r in rows}):
        per = {r["scheme"]: r["seeds"] for r in rows if r["pb"] == pb}
        n = len(per[order[0]])
        out[pb] = sum(all(per[a][i] <= per[b][i] for a, b in zip(order, order[1:])) for i in range(n))
    return out


def block_size_sweep(values, seed: int = 0, base=None) -> list[dict]:
    rows = []
    for n in values:
        m, _ = run_scenario(_merge(BLOCK_SETUP, base, {"consensus": {"block_txs": int(n)}}), seed=seed)
        rows.append({"block_txs": int(n), "throughput_tps": m.throughput(), "latency_s": m.mean_latency(),
                     "mean_rounds": m.mean_rounds()})
    return rows


def offload_sweep(densities=None, data_sizes=None, seed: int = 0, base=None, **off) -> list[dict]:
    cfg = deep_merge(DEFAULTS, base or {})
    if densities is not None:
        off["densities"] = [float(v) for v in densities]
    if data_sizes is not None:
        off["data_sizes"] = [float(v) for v in data_sizes]
    return [p.row() for p in run_offload(cfg, off, seed)]


def psi_sweep(values, alpha: float | None = None, base=None) -> list[dict]:
    g = deep_merge(DEFAULTS, base or {})["game"]
    p = game.GameParams(**{k: g[k] for k in ("rho", "varpi", "lambda_p", "lambda_c", "lambda_e", "psi", "alpha",
                                             "x_max", "y_max")})
    if alpha is not None:
        p = p.with_(alpha=float(alpha))
    return [game.se_report(p.with_(psi=float(v))) for v in values]


def energy_vs_z(values, schemes=("proposal", "naive"), seed: int = 0, heights: int = 5, base=None) -> list[dict]:
    """Per-block consensus energy proxy on honest runs with 1000-tx blocks."""
    rows = []
    for z in values:
        for scheme in schemes:
            cfg = _merge({"network": {"full_nodes": int(z)},
                          "consensus": {"scheme": scheme, "z": int(z), "psi": psi_for(int(z)), "heights": heights,
                                        "block_txs": 1000}}, base)
            m, sim = run_scenario(cfg, seed=seed)
            con = sim.scenario.consensus
            n = max(1, len(m.heights))
            rows.append({"z": int(z), "scheme": scheme,
                         "energy_per_block": m.energy_per_block(con["e_tx"], con["e_verify"]),
                         "bytes_per_block": m.bytes / n, "verifications_per_block": m.verifications / n})
    return rows


def energy_gaps(rows: list[dict]) -> dict:
    """Relative saving of the proposal over naive Tendermint, per Z."""
    out = {}
    for z in sorted({r["z"] for r in rows}):
        e = {r["scheme"]: r["energy_per_block"] for r in rows if r["z"] == z}
        out[z] = (e["naive"] - e["proposal"]) / e["naive"]
    return out


def complexity_sweep(values=(4, 10, 20, 40), seed: int = 0, heights: int = 20, base=None) -> tuple[list[dict], float]:
    """Messages per round on honest runs; returns rows and the fitted log-log slope."""
    rows = []
    for z in values:
        cfg = _merge({"network": {"full_nodes": int(z)},
                      "consensus": {"z": int(z), "psi": psi_for(int(z)), "heights": heights}}, base)
        m, _ = run_scenario(cfg, seed=seed)
        rows.append({"z": int(z), "messages_per_round": m.messages_per_round(), "mean_rounds": m.mean_rounds()})
    slope = float(np.polyfit(np.log([r["z"] for r in rows]), np.log([r["messages_per_round"] for r in rows]), 1)[0])
    return rows, slope


def availability_run(ratio: float, seed: int, start: float = 20.0, end: float = 60.0, heights: int = 60,
                     base=None) -> dict:
    """Commits inside a partition window and rounds needed after it heals."""
    cfg = _merge({"consensus": {"z": 10, "psi": 7, "heights": heights},
                  "adversary": {"partition": {"ratio": ratio, "start": start, "end": end, "byzantine_share": 0.0}}},
                 base)
    m, sim = run_scenario(cfg, seed=seed)
    delta = sim.scenario.network["delta"]
    # votes already in flight at the cut may still land within 2 delta
    inside = [h for h in m.heights if start + 2 * delta <= h.commit_time < end]
    return {"ratio": ratio, "seed": seed, "committed": len(m.heights), "heights": heights,
            "inside_window": len(inside), "rounds_after_heal": m.rounds_after_heal()}
