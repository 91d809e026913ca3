"""Decayed reputation bookkeeping.

Per slot n, each full node's raw reputation is the signed sum of the
behaviour deltas recorded in that slot plus the previous value discounted
by exp(-eta). Slot 1 starts everyone at the initial value. The normalized
value is the logistic sigmoid of the raw value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

# behaviour -> (sign, default magnitude)
BEHAVIOURS = {
    "sbc": (+1, 4.0),  # successful block creation
    "sbv": (+1, 2.0),  # successful block validation
    "cp": (-1, 5.0),
    "cv": (-1, 3.0),
    "wbc": (-1, 5.0),
    "nbc": (-1, 1.5),
    "vol": (-1, 3.0),
    "rep-informer": (+1, 1.5),
    "rep-accused": (-1, 2.5),
}


@dataclass(frozen=True)
class BehaviorRecord:
    node: int
    slot: int
    behavior: str
    magnitude: float
    sign: int
    evidence: bytes = b""

    @property
    def delta(self) -> float:
        return self.sign * self.magnitude


def make_record(node, slot, behavior, magnitude=None, evidence=b"", deltas=None) -> BehaviorRecord:
    sign, default = BEHAVIOURS[behavior]
    if deltas and behavior in deltas:
        default = deltas[behavior]
    return BehaviorRecord(node, slot, behavior, float(default if magnitude is None else magnitude), sign, evidence)


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def update_reputation(prev: float, slot: int, records: Iterable[BehaviorRecord], eta: float,
                      initial: float = 3.0) -> float:
    """One step of the decayed update for a single node."""
    if slot < 1:
        raise ValueError("slots are numbered from 1")
    if slot == 1:
        return float(initial)
    return sum(r.delta for r in records) + math.exp(-eta) * prev


def reputation_bound(max_slot_delta: float, eta: float, initial: float = 3.0) -> float:
    """Upper bound on |raw| when per-slot deltas never exceed max_slot_delta in size."""
    return max_slot_delta / (1.0 - math.exp(-eta)) + abs(initial)


class ReputationLedger:
    """Raw and normalized reputation for a fixed set of full nodes."""

    def __init__(self, nodes: Iterable, initial: float = 3.0, eta: float = 0.5, deltas: dict | None = None,
                 keep_history: bool = True):
        self.nodes = list(nodes)
        self.initial = float(initial)
        self.eta = float(eta)
        self.deltas = dict(deltas or {})
        self.raw = {u: float(initial) for u in self.nodes}
        self.slot = 0  # last closed slot
        self.pending: dict = {}  # slot -> [BehaviorRecord]
        self.history: list = [] if keep_history else None
        self.all_records: list = []

    def record(self, node, slot: int, behavior: str, magnitude=None, evidence=b"") -> BehaviorRecord:
        rec = make_record(node, slot, behavior, magnitude, evidence, self.deltas)
        self.add(rec)
        return rec

    def add(self, rec: BehaviorRecord):
        if rec.slot <= self.slot:
            # slot already closed; count it in the next open one
            rec = BehaviorRecord(rec.node, self.slot + 1, rec.behavior, rec.magnitude, rec.sign, rec.evidence)
        self.pending.setdefault(rec.slot, []).append(rec)
        self.all_records.append(rec)

    def close_slot(self) -> int:
        n = self.slot + 1
        recs = self.pending.pop(n, [])
        by_node: dict = {}
        for r in recs:
            by_node.setdefault(r.node, []).append(r)
        for u in self.nodes:
            self.raw[u] = update_reputation(self.raw[u], n, by_node.get(u, ()), self.eta, self.initial)
        self.slot = n
        if self.history is not None:
            for u in self.nodes:
                self.history.append((n, u, self.raw[u], sigmoid(self.raw[u])))
        return n

    def advance_to(self, slot: int):
        """Close every slot up to and including slot."""
        while self.slot < slot:
            self.close_slot()

    def normalized(self, node=None):
        if node is not None:
            return sigmoid(self.raw[node])
        return {u: sigmoid(v) for u, v in self.raw.items()}

    def csv_rows(self):
        return list(self.history or [])
