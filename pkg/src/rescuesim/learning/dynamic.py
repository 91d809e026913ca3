"""Repeated pricing game between one UAV and its vehicles, played by learning agents.

Slot n:
  1. the UAV observes the AoCRs of slot n-1 and picks a payment per vehicle;
  2. each vehicle observes its payment and picks an AoCR
     (vehicle_state="previous" makes it decide on the payment of slot n-1 instead);
  3. both get their stage payoffs from the game module.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import game
from .agents import ActionGrid, AgentConfig, DQNAgent, GreedyAgent, TabularQAgent

SCHEMES = ("dqn", "qlearn", "greedy")
CSV_COLUMNS = ("slot", "agent", "action", "greedy_action", "reward", "eps")


@dataclass
class DynamicTrace:
    scheme: str
    x: np.ndarray  # (slots, vehicles) AoCR played
    y: np.ndarray  # (slots, vehicles) payment played
    uav_reward: np.ndarray  # (slots,)
    vehicle_reward: np.ndarray  # (slots, vehicles)
    x_greedy: np.ndarray
    y_greedy: np.ndarray
    eps_uav: float
    eps_vehicle: float
    notes: list = field(default_factory=list)

    def tail_mean(self, tail: int = 500) -> tuple[float, float]:
        return float(self.x[-tail:].mean()), float(self.y[-tail:].mean())

    def deviation(self, eq: game.StrategyPair, tail: int = 500) -> tuple[float, float]:
        """Relative distance of the tail-mean strategies from an equilibrium point."""
        x, y = self.tail_mean(tail)
        return abs(x - eq.x) / eq.x, abs(y - eq.y) / eq.y

    def write_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for n in range(len(self.uav_reward)):
                for i in range(self.y.shape[1]):
                    w.writerow([n + 1, f"uav:{i}", f"{self.y[n, i]:.6g}", f"{self.y_greedy[n, i]:.6g}",
                                f"{self.uav_reward[n]:.6g}", self.eps_uav])
                for i in range(self.x.shape[1]):
                    w.writerow([n + 1, f"vehicle:{i}", f"{self.x[n, i]:.6g}", f"{self.x_greedy[n, i]:.6g}",
                                f"{self.vehicle_reward[n, i]:.6g}", self.eps_vehicle])


def _rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), sum(name.encode()) * 7919]))


def make_agents(scheme: str, p: game.GameParams, learn: dict, seed: int, vehicles: int = 1):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown learning scheme {scheme!r}")
    wgrid = ActionGrid(int(learn["levels_uav"]), p.y_max)
    vgrid = ActionGrid(int(learn["levels_vehicle"]), p.x_max)
    base = dict(gamma=learn["discount"], history=learn["window"], updates=learn["updates"], memory=learn["memory"],
                lr=learn["lr"], batch=learn["batch"], grad_clip=learn["grad_clip"] or None,
                output_relu=learn["output_relu"], tabular_lr=learn["tabular_lr"],
                optimizer=learn.get("optimizer", "sgd"))
    ucfg = AgentConfig(eps=learn["eps_uav"], reward_scale=learn["reward_scale"], **base)
    vcfg = AgentConfig(eps=learn["eps_vehicle"], reward_scale=learn["reward_scale_vehicle"], **base)
    if scheme == "dqn":
        uav = DQNAgent(wgrid, p.x_max, ucfg, _rng(seed, "uav"), heads=vehicles)
        vehs = [DQNAgent(vgrid, p.y_max, vcfg, _rng(seed, f"vehicle{i}")) for i in range(vehicles)]
    elif scheme == "qlearn":
        if vehicles != 1:
            raise ValueError("the tabular baseline handles a single vehicle")
        uav = TabularQAgent(wgrid, vgrid, ucfg, _rng(seed, "uav"))
        vehs = [TabularQAgent(vgrid, wgrid, vcfg, _rng(seed, "vehicle0"))]
    else:
        if vehicles != 1:
            raise ValueError("the greedy baseline handles a single vehicle")
        uav = GreedyAgent(wgrid, lambda ys, x: np.array([game.uav_payoff(x, y, p) for y in ys]))
        vehs = [GreedyAgent(vgrid, lambda xs, y: game.vehicle_payoff(xs, y, p))]
    return uav, vehs


def run_dynamic_game(p: game.GameParams, learn: dict, scheme: str = "dqn", slots: int | None = None,
                     seed: int = 0, vehicles: int = 1, vehicle_state: str = "current",
                     checkpoint_dir=None, checkpoint_every: int = 0) -> DynamicTrace:
    slots = int(slots or learn["slots"])
    uav, vehs = make_agents(scheme, p, learn, seed, vehicles)
    xs = np.zeros((slots, vehicles))
    ys = np.zeros((slots, vehicles))
    xg = np.zeros((slots, vehicles))
    yg = np.zeros((slots, vehicles))
    ru = np.zeros(slots)
    rv = np.zeros((slots, vehicles))
    last_x = np.zeros(vehicles)
    last_y = np.zeros(vehicles)
    for n in range(slots):
        uav.observe(last_x)
        y = uav.grid.value(uav.act())
        yg[n] = uav.grid.value(uav.greedy)
        x = np.zeros(vehicles)
        for i, v in enumerate(vehs):
            v.observe(y[i] if vehicle_state == "current" else last_y[i])
            x[i] = v.grid.value(v.act()[0])
            xg[n, i] = v.grid.value(v.greedy[0])
        per_pair = np.array([game.uav_payoff(x[i], y[i], p) for i in range(vehicles)])
        uav.reward(per_pair)
        for i, v in enumerate(vehs):
            rv[n, i] = game.vehicle_payoff(x[i], y[i], p)
            v.reward(rv[n, i])
        xs[n], ys[n], ru[n] = x, y, per_pair.sum()
        last_x, last_y = x, y
        if checkpoint_dir and checkpoint_every and scheme == "dqn" and (n + 1) % checkpoint_every == 0:
            d = Path(checkpoint_dir)
            d.mkdir(parents=True, exist_ok=True)
            uav.net.save(d / f"uav_{n + 1}.npz")
            for i, v in enumerate(vehs):
                v.net.save(d / f"vehicle{i}_{n + 1}.npz")
    notes = []
    if scheme == "dqn" and uav.window.truncated:
        notes.append("UAV state window longer than 36 entries; oldest entries dropped")
    return DynamicTrace(scheme, xs, ys, ru, rv, xg, yg, learn["eps_uav"], learn["eps_vehicle"], notes)
