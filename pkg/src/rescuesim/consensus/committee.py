"""Reputation-weighted validator election and leader rotation."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

from ..crypto import h0
from ..ledger.codec import encode


class ConfigError(ValueError):
    pass


@dataclass(eq=False)
class Committee:
    members: tuple  # validator ids, best-ranked first
    level1: tuple  # the members allowed to propose
    pks: Mapping = field(default_factory=dict)
    power: Mapping = field(default_factory=dict)  # normalized reputation stake per member

    def __post_init__(self):
        if not self.members:
            raise ConfigError("committee is empty")
        if not self.level1 or len(self.level1) > len(self.members):
            raise ConfigError("level-1 set must be non-empty and no larger than the committee")
        if not set(self.level1) <= set(self.members):
            raise ConfigError("level-1 members must belong to the committee")
        self.index = {m: i for i, m in enumerate(self.members)}
        self.key = h0(encode(tuple(self.members), tuple(self.level1),
                             tuple(self.pks.get(m, b"") for m in self.members)))

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def psi(self) -> int:
        return len(self.level1)

    @property
    def max_faulty(self) -> int:
        return (self.size - 1) // 3

    def pk_of(self, node_id) -> bytes:
        return self.pks[node_id]

    def __contains__(self, node_id) -> bool:
        return node_id in self.index

    def leader_for(self, height: int, round: int):
        return leader_for(height, round, self)

    @property
    def level2(self) -> tuple:
        lv1 = set(self.level1)
        return tuple(m for m in self.members if m not in lv1)


def leader_for(height: int, round: int, committee: Committee):
    """Round-robin over the level-1 members."""
    lv1 = committee.level1
    return lv1[(height + round) % len(lv1)]


def elect_validators(nodes: Sequence, reputation: Mapping, z: int, psi: int, rng=None,
                     ballots: Mapping | None = None, raw_reputation: Mapping | None = None,
                     pks: Mapping | None = None) -> Committee:
    """Stake-weighted delegate election.

    Every full node casts one ballot (default: for itself; ballots overrides
    individual choices) weighted by its normalized reputation. The z
    delegates with the most received weight form the committee and the top
    psi of them are level-1. Ties go to the higher own reputation, then the
    lower id. rng is accepted for interface symmetry and only used when a
    ballot is the string "random".
    """
    nodes = list(nodes)
    if z > len(nodes):
        raise ConfigError(f"need at least {z} full nodes, have {len(nodes)}")
    if not 1 <= psi <= z:
        raise ConfigError(f"psi={psi} must lie in [1, z={z}]")
    ballots = dict(ballots or {})
    raw = raw_reputation if raw_reputation is not None else reputation
    received = {n: 0.0 for n in nodes}
    for voter in nodes:
        choice = ballots.get(voter, voter)
        if choice == "random":
            choice = nodes[int(rng.integers(len(nodes)))]
        if choice not in received:
            raise ConfigError(f"ballot of {voter} names unknown node {choice}")
        received[choice] += float(reputation[voter])
    ranked = sorted(nodes, key=lambda n: (-received[n], -float(raw[n]), n))
    members = tuple(ranked[:z])
    return Committee(members, members[:psi], dict(pks or {}),
                     {m: float(reputation[m]) for m in members})


def static_committee(ids: Sequence, psi: int | None = None, pks: Mapping | None = None) -> Committee:
    ids = tuple(ids)
    return Committee(ids, ids[:psi or len(ids)], dict(pks or {}), {i: 1.0 for i in ids})
