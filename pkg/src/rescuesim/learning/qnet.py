"""Small convolutional Q-network in plain numpy, with hand-written backprop.

Layout (per sample): 1x6x6 plane -> conv 3x3, 20 filters -> 20x4x4 -> conv 2x2,
40 filters -> 40x3x3 -> flatten (C, H, W order) 360 -> dense 180 -> dense
heads*actions, reshaped to (heads, actions). ReLU after every layer, the
output layer included (configurable).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

FORMAT_VERSION = 1
PLANE = 6


def _im2col(x: np.ndarray, k: int) -> tuple[np.ndarray, int]:
    """(B, C, H, W) -> (B*Ho*Wo, C*k*k) patches, stride 1."""
    b, c, h, _ = x.shape
    ho = h - k + 1
    win = sliding_window_view(x, (k, k), axis=(2, 3))  # B, C, Ho, Wo, k, k
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * ho, c * k * k), ho


def _col2im(dcols: np.ndarray, shape, k: int) -> np.ndarray:
    b, c, h, _ = shape
    ho = h - k + 1
    d = dcols.reshape(b, ho, ho, c, k, k)
    dx = np.zeros(shape)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + ho, j:j + ho] += d[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dx


def _relu(z):
    return np.maximum(z, 0.0)


@dataclass
class QNetwork:
    n_actions: int
    heads: int = 1
    output_relu: bool = True
    params: dict = field(default_factory=dict)

    SHAPES = {"w1": (20, 1, 3, 3), "b1": (20,), "w2": (40, 20, 2, 2), "b2": (40,), "w3": (180, 360), "b3": (180,)}

    @classmethod
    def init(cls, n_actions: int, rng: np.random.Generator, heads: int = 1, output_relu: bool = True,
             out_bias: float = 0.1) -> "QNetwork":
        """He-normal weights; the output bias starts slightly positive so no output ReLU begins dead."""
        p = {}
        for name, shape in cls.SHAPES.items():
            if name.startswith("b"):
                p[name] = np.zeros(shape)
            else:
                fan_in = int(np.prod(shape[1:]))
                p[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)
        p["w4"] = rng.normal(0.0, np.sqrt(2.0 / 180), (heads * n_actions, 180))
        p["b4"] = np.full(heads * n_actions, out_bias if output_relu else 0.0)
        return cls(n_actions, heads, output_relu, p)

    @classmethod
    def zeros(cls, n_actions: int, heads: int = 1, output_relu: bool = True) -> "QNetwork":
        p = {name: np.zeros(shape) for name, shape in cls.SHAPES.items()}
        p["w4"] = np.zeros((heads * n_actions, 180))
        p["b4"] = np.zeros(heads * n_actions)
        return cls(n_actions, heads, output_relu, p)

    def copy(self) -> "QNetwork":
        return QNetwork(self.n_actions, self.heads, self.output_relu, {k: v.copy() for k, v in self.params.items()})

    # ---- forward / backward --------------------------------------------------------------

    def _forward(self, planes: np.ndarray):
        p = self.params
        b = planes.shape[0]
        x0 = planes.reshape(b, 1, PLANE, PLANE)
        c1, h1 = _im2col(x0, 3)
        z1 = c1 @ p["w1"].reshape(20, -1).T + p["b1"]
        a1 = _relu(z1).reshape(b, h1, h1, 20).transpose(0, 3, 1, 2)
        c2, h2 = _im2col(a1, 2)
        z2 = c2 @ p["w2"].reshape(40, -1).T + p["b2"]
        a2 = _relu(z2).reshape(b, h2, h2, 40).transpose(0, 3, 1, 2).reshape(b, 360)
        z3 = a2 @ p["w3"].T + p["b3"]
        a3 = _relu(z3)
        z4 = a3 @ p["w4"].T + p["b4"]
        out = _relu(z4) if self.output_relu else z4
        cache = (x0, c1, z1, a1, c2, z2, a2, z3, a3, z4)
        return out.reshape(b, self.heads, self.n_actions), cache

    def forward(self, plane: np.ndarray) -> np.ndarray:
        """Q-values (heads, actions) for one 6x6 plane, or (B, heads, actions) for a batch."""
        plane = np.asarray(plane, dtype=float)
        if plane.shape == (PLANE, PLANE):
            return self._forward(plane[None])[0][0]
        if plane.ndim != 3 or plane.shape[1:] != (PLANE, PLANE):
            raise ValueError(f"expected a 6x6 plane or a batch of them, got shape {plane.shape}")
        return self._forward(plane)[0]

    def loss_and_grads(self, planes, actions, targets):
        """Mean squared TD error on the taken actions, and its gradient.

        planes (B, 6, 6); actions (B, heads) ints; targets (B, heads).
        """
        planes = np.asarray(planes, dtype=float)
        actions = np.asarray(actions, dtype=int).reshape(len(planes), self.heads)
        targets = np.asarray(targets, dtype=float).reshape(len(planes), self.heads)
        q, (x0, c1, z1, a1, c2, z2, a2, z3, a3, z4) = self._forward(planes)
        b = len(planes)
        bi = np.arange(b)[:, None]
        hi = np.arange(self.heads)[None, :]
        err = q[bi, hi, actions] - targets
        loss = float(np.mean(np.sum(err ** 2, axis=1)))
        p = self.params
        dq = np.zeros_like(q)
        dq[bi, hi, actions] = 2.0 * err / b
        dz4 = dq.reshape(b, -1)
        if self.output_relu:
            dz4 = dz4 * (z4 > 0)
        g = {"w4": dz4.T @ a3, "b4": dz4.sum(0)}
        dz3 = (dz4 @ p["w4"]) * (z3 > 0)
        g["w3"] = dz3.T @ a2
        g["b3"] = dz3.sum(0)
        da2 = (dz3 @ p["w3"]).reshape(b, 40, 3, 3).transpose(0, 2, 3, 1).reshape(-1, 40)
        dz2 = da2 * (z2 > 0)
        g["w2"] = (dz2.T @ c2).reshape(p["w2"].shape)
        g["b2"] = dz2.sum(0)
        da1 = _col2im(dz2 @ p["w2"].reshape(40, -1), a1.shape, 2)
        dz1 = da1.transpose(0, 2, 3, 1).reshape(-1, 20) * (z1 > 0)
        g["w1"] = (dz1.T @ c1).reshape(p["w1"].shape)
        g["b1"] = dz1.sum(0)
        return loss, g

    def sgd(self, grads: dict, lr: float, clip: float | None = None, optimizer: str = "sgd"):
        """One descent step. "adam" keeps its moment estimates on the network."""
        scale = 1.0
        if clip:
            norm = np.sqrt(sum(float(np.sum(v * v)) for v in grads.values()))
            if norm > clip:
                scale = clip / norm
        if optimizer == "sgd":
            for k, v in grads.items():
                self.params[k] -= lr * scale * v
            return
        if optimizer != "adam":
            raise ValueError(f"unknown optimizer {optimizer!r}")
        st = self.__dict__.setdefault("_adam", {"t": 0, "m": {}, "v": {}})
        st["t"] += 1
        b1, b2, t = 0.9, 0.999, st["t"]
        for k, g in grads.items():
            g = g * scale
            m = st["m"][k] = b1 * st["m"].get(k, 0.0) + (1 - b1) * g
            v = st["v"][k] = b2 * st["v"].get(k, 0.0) + (1 - b2) * g * g
            self.params[k] -= lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + 1e-8)

    # ---- persistence -------------------------------------------------------------------

    def save(self, path):
        np.savez(path, format_version=np.array(FORMAT_VERSION),
                 meta=np.array([self.n_actions, self.heads, int(self.output_relu)]), **self.params)

    @classmethod
    def load(cls, path) -> "QNetwork":
        with np.load(path) as z:
            version = int(z["format_version"])
            if version != FORMAT_VERSION:
                raise ValueError(f"unsupported checkpoint format {version}")
            n, heads, relu = (int(v) for v in z["meta"])
            params = {k: z[k].copy() for k in z.files if k not in ("format_version", "meta")}
        return cls(n, heads, bool(relu), params)


def qnet_forward(net: QNetwork, plane) -> np.ndarray:
    return net.forward(plane)
