"""Partially synchronous message transport.

Before GST a message takes uniform[delta, pre_gst_factor*delta] seconds and
may be dropped (a dropped message is retransmitted at GST). From GST on,
every message takes uniform[delta_min, delta]. Transmission time
(bytes*8/bandwidth) comes on top. A partition holds every message between
two components until it heals, then delivers it within delta.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Partition:
    start: float
    end: float
    groups: list  # list of sets of node ids; nodes absent from every group are isolated together

    def component(self, node):
        for i, g in enumerate(self.groups):
            if node in g:
                return i
        return -1

    def separates(self, a, b, t: float) -> bool:
        return self.start <= t < self.end and self.component(a) != self.component(b)


@dataclass
class TransportStats:
    sent: int = 0
    bytes: int = 0
    dropped: int = 0
    held: int = 0
    late_post_gst: int = 0  # post-GST connected deliveries slower than delta (must stay 0)


@dataclass
class Transport:
    delta: float = 1.0
    delta_min: float = 0.01
    gst: float = 0.0
    pre_gst_factor: float = 10.0
    drop_prob: float = 0.0
    bandwidth: float = 100e6  # bits per second
    partitions: list = field(default_factory=list)
    seed: int = 0
    record: bool = False

    def __post_init__(self):
        if not 0 < self.delta_min <= self.delta:
            raise ValueError("need 0 < delta_min <= delta")
        ss = np.random.SeedSequence([self.seed, 0x7A5])
        main, chunks = ss.spawn(2)
        self.rng = np.random.default_rng(main)
        self.rng_chunks = np.random.default_rng(chunks)
        self.stats = TransportStats()
        self.log: list = []
        # blocks of pre-drawn uniforms keep per-message cost low
        self._buf = {}

    def _u(self, stream: str) -> float:
        buf = self._buf.get(stream)
        if not buf:
            rng = self.rng_chunks if stream == "chunk" else self.rng
            buf = self._buf[stream] = rng.random(4096).tolist()
            buf.reverse()
        return buf.pop()

    def tx_time(self, size: int) -> float:
        return size * 8.0 / self.bandwidth

    def delay(self, now: float, stream: str = "main") -> float:
        """Propagation delay of a message sent at `now`; may be a retransmission at GST."""
        u = self._u(stream)
        if now >= self.gst:
            return self.delta_min + u * (self.delta - self.delta_min)
        if self.drop_prob and self._u(stream) < self.drop_prob:
            self.stats.dropped += 1
            return (self.gst - now) + self.delta_min + self._u(stream) * (self.delta - self.delta_min)
        return self.delta * (1.0 + u * (self.pre_gst_factor - 1.0))

    def arrival(self, src, dst, now: float, size: int, stream: str = "main", extra: float = 0.0) -> float:
        self.stats.sent += 1
        self.stats.bytes += size
        if src == dst:
            return now
        return now + extra + self.tx_time(size) + self.delay(now, stream)

    def heal_time(self, a, b, t: float):
        """If a partition separates a and b at time t, when it heals; else None."""
        for p in self.partitions:
            if p.separates(a, b, t):
                return p.end
        return None

    def redeliver(self, heal: float) -> float:
        self.stats.held += 1
        return heal + self.delta_min + self._u("main") * (self.delta - self.delta_min)

    def note_delivery(self, src, dst, sent: float, delivered: float, size: int, held: bool):
        if sent >= self.gst and not held and delivered - sent > self.delta + self.tx_time(size) + 1e-9:
            self.stats.late_post_gst += 1
        if self.record:
            self.log.append((src, dst, sent, delivered, held))
