"""Learning agents for the repeated pricing game.

Every agent follows the same per-slot protocol:

    agent.observe(state)   # newest opponent action seen before acting
    a = agent.act()        # level index per head
    agent.reward(r)        # payoff for this slot, one entry per head

An experience (plane, action, reward, next plane) is only complete once
the next state has been observed, so it is stored and trained on at the
following `observe` call.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .qnet import PLANE, QNetwork


@dataclass(frozen=True)
class ActionGrid:
    levels: int
    maximum: float

    def __post_init__(self):
        if self.levels < 2 or self.maximum <= 0:
            raise ValueError("need at least two levels and a positive maximum")

    @property
    def values(self) -> np.ndarray:
        return np.arange(self.levels) * (self.maximum / (self.levels - 1))

    def value(self, idx) -> np.ndarray | float:
        return np.asarray(idx) * (self.maximum / (self.levels - 1))

    def nearest(self, v) -> int:
        return int(np.clip(np.rint(v / self.maximum * (self.levels - 1)), 0, self.levels - 1))


class StateWindow:
    """The current state plus the `history` states before it, oldest first."""

    def __init__(self, history: int = 11, dim: int = 1, scale: float = 1.0):
        self.length = history + 1
        self.dim = dim
        self.scale = float(scale)
        self.buf: deque = deque([np.zeros(dim)] * self.length, maxlen=self.length)
        self.truncated = False

    def push(self, state) -> None:
        s = np.clip(np.asarray(state, dtype=float).reshape(self.dim) / self.scale, 0.0, 1.0)
        self.buf.append(s)

    def encode(self) -> np.ndarray:
        return encode_state(self)


def encode_state(window: StateWindow) -> np.ndarray:
    """Flatten the window chronologically, zero-pad to 36 and fill a 6x6 plane row by row.

    When the flattened window is longer than 36 entries, the oldest entries
    are dropped (and the window remembers that it happened).
    """
    flat = np.concatenate(list(window.buf))
    cells = PLANE * PLANE
    if flat.size > cells:
        window.truncated = True
        flat = flat[-cells:]
    out = np.zeros(cells)
    out[:flat.size] = flat
    return out.reshape(PLANE, PLANE)


class ReplayMemory:
    """FIFO buffer of experiences with uniform sampling."""

    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.rng = rng
        self.items: deque = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def push(self, plane, action, reward, next_plane) -> None:
        self.items.append((plane, np.asarray(action, dtype=int), np.asarray(reward, dtype=float), next_plane))

    def sample(self, k: int = 1) -> list:
        idx = self.rng.integers(len(self.items), size=k)
        return [self.items[i] for i in idx]


def select_action(q: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Greedy with probability eps, otherwise uniform over every level (greedy one included).

    Ties in the greedy choice go to the lowest index.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if rng.random() < eps:
        return int(np.argmax(q))
    return int(rng.integers(len(q)))


def train_step(net: QNetwork, memory: ReplayMemory, gamma: float, updates: int, lr: float,
               target: QNetwork | None = None, batch: int = 1, grad_clip: float | None = None,
               optimizer: str = "sgd") -> float:
    """`updates` SGD steps on uniformly sampled experiences; returns the last loss.

    The bootstrap term uses `target` (the weights from the previous slot) when
    given, the live weights otherwise.
    """
    if not len(memory):
        raise ValueError("replay memory is empty")
    tnet = target or net
    loss = 0.0
    for _ in range(updates):
        exp = memory.sample(batch)
        planes = np.stack([e[0] for e in exp])
        nxt = np.stack([e[3] for e in exp])
        actions = np.stack([e[1] for e in exp])
        rewards = np.stack([e[2] for e in exp])
        y = rewards + gamma * tnet.forward(nxt).max(axis=2) if gamma else rewards
        loss, g = net.loss_and_grads(planes, actions, y)
        net.sgd(g, lr, grad_clip, optimizer)
    return loss


# ---- agents ---------------------------------------------------------------------------------


@dataclass
class AgentConfig:
    gamma: float = 0.8
    eps: float = 0.92
    history: int = 11  # prior states kept besides the current one
    updates: int = 4
    memory: int = 1000
    lr: float = 1e-3
    batch: int = 1
    reward_scale: float = 0.01
    grad_clip: float | None = 10.0
    output_relu: bool = False
    tabular_lr: float = 0.1
    optimizer: str = "sgd"


class DQNAgent:
    def __init__(self, grid: ActionGrid, state_scale: float, cfg: AgentConfig, rng: np.random.Generator,
                 heads: int = 1, state_dim: int | None = None):
        self.grid = grid
        self.cfg = cfg
        self.rng = rng
        self.heads = heads
        self.window = StateWindow(cfg.history, state_dim or heads, state_scale)
        self.net = QNetwork.init(grid.levels, rng, heads, cfg.output_relu)
        self.target = self.net.copy()
        self.memory = ReplayMemory(cfg.memory, rng)
        self.slot = 0
        self._pending = None
        self._plane = None
        self._action = None
        self.last_loss = float("nan")
        self.greedy = np.zeros(heads, dtype=int)

    def observe(self, state) -> None:
        self.window.push(state)
        self.slot += 1
        plane = self.window.encode()
        if self._pending is not None:
            p, a, r = self._pending
            self.memory.push(p, a, r, plane)
            self._pending = None
            # weights from the previous slot serve as the bootstrap target
            self.target = self.net.copy()
            self.last_loss = train_step(self.net, self.memory, self.cfg.gamma, self.cfg.updates, self.cfg.lr,
                                        self.target, self.cfg.batch, self.cfg.grad_clip, self.cfg.optimizer)
        self._plane = plane

    def q_values(self) -> np.ndarray:
        return self.net.forward(self._plane)

    def act(self) -> np.ndarray:
        if self.slot <= self.cfg.history:
            a = self.rng.integers(self.grid.levels, size=self.heads)
            self.greedy = a.copy()
        else:
            q = self.q_values()
            self.greedy = q.argmax(axis=1)
            a = np.array([select_action(q[h], self.cfg.eps, self.rng) for h in range(self.heads)])
        self._action = a
        return a

    def reward(self, r) -> None:
        r = np.asarray(r, dtype=float).reshape(self.heads) * self.cfg.reward_scale
        self._pending = (self._plane, self._action, r)


class TabularQAgent:
    """Q table indexed by the level of the latest opponent action."""

    def __init__(self, grid: ActionGrid, state_grid: ActionGrid, cfg: AgentConfig, rng: np.random.Generator):
        self.grid = grid
        self.state_grid = state_grid
        self.cfg = cfg
        self.rng = rng
        self.q = np.zeros((state_grid.levels, grid.levels))
        self.slot = 0
        self.state = 0
        self._pending = None
        self.greedy = np.zeros(1, dtype=int)

    def observe(self, state) -> None:
        s = self.state_grid.nearest(float(np.asarray(state).ravel()[0]))
        self.slot += 1
        if self._pending is not None:
            ps, a, r = self._pending
            td = r + self.cfg.gamma * self.q[s].max() - self.q[ps, a]
            self.q[ps, a] += self.cfg.tabular_lr * td
            self._pending = None
        self.state = s

    def act(self) -> np.ndarray:
        if self.slot <= self.cfg.history:
            a = int(self.rng.integers(self.grid.levels))
            self.greedy = np.array([a])
        else:
            row = self.q[self.state]
            self.greedy = np.array([int(np.argmax(row))])
            a = select_action(row, self.cfg.eps, self.rng)
        self._action = a
        return np.array([a])

    def reward(self, r) -> None:
        self._pending = (self.state, self._action, float(np.asarray(r).ravel()[0]) * self.cfg.reward_scale)


class GreedyAgent:
    """Myopic best response on the grid to the latest opponent action."""

    def __init__(self, grid: ActionGrid, payoff_of_level):
        self.grid = grid
        self.payoff_of_level = payoff_of_level  # (own level values, opponent value) -> payoffs
        self.opp = 0.0
        self.greedy = np.zeros(1, dtype=int)

    def observe(self, state) -> None:
        self.opp = float(np.asarray(state).ravel()[0])

    def act(self) -> np.ndarray:
        vals = self.payoff_of_level(self.grid.values, self.opp)
        self.greedy = np.array([int(np.argmax(vals))])
        return self.greedy.copy()

    def reward(self, r) -> None:
        pass
