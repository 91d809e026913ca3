"""Byzantine behaviour injection.

A ByzantineNode runs the normal state machine but rewrites what it sends.
All Byzantine nodes of one run share a Coalition, which is how a
conflicting-proposal leader tells its accomplices which side of the
network got which block.

Behaviours
  cp         as leader, two different blocks to two disjoint halves; every
             cp accomplice votes block A towards side A and block B towards side B
  cv         with probability cv_split a vote carries a conflicting value towards
             part of the peers (cv_mode "split": half of them, "lite": a single peer)
  vol        ignores its lock and precommits straight after prevoting
  nbc        silent leader
  wbc        as leader, proposes a block that fails validation
  spoofing   honest until switch_time, then nbc/wbc as leader and cv-lite as voter
  collusion  ballots for the colluder, which proposes invalid blocks that
             the other colluders prevote anyway
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..consensus import ConsensusNode
from ..crypto import h0
from ..ledger import NIL, assemble_block
from .transport import Partition


@dataclass
class AdversaryScript:
    byzantine: dict = field(default_factory=dict)  # node id -> tuple of behaviours
    switch_time: float = 0.0
    cv_split: float = 0.5
    cv_mode: str = "split"
    spoof_leader: str = "nbc"
    colluder: int | None = None
    partition: Partition | None = None

    @property
    def ids(self) -> set:
        return set(self.byzantine)

    def ballots(self) -> dict:
        if self.colluder is None:
            return {}
        return {b: self.colluder for b, beh in self.byzantine.items() if "collusion" in beh}


def build_script(adv: dict, full_nodes: int, rng: np.random.Generator) -> AdversaryScript:
    """Pick the Byzantine set and the partition from the adversary config section."""
    if adv["byzantine"]:
        ids = sorted(adv["byzantine"])
    else:
        k = int(np.floor(adv["byzantine_ratio"] * full_nodes + 1e-9))
        if adv["placement"] == "first":
            ids = list(range(k))
        else:
            ids = sorted(int(i) for i in rng.choice(full_nodes, size=k, replace=False))
    behaviour = tuple(adv["behavior"]) or ("cp", "cv", "vol")
    colluder = adv["colluder"]
    if "collusion" in behaviour and colluder is None and ids:
        colluder = ids[0]
    script = AdversaryScript({i: behaviour for i in ids}, float(adv["switch_time"]), float(adv["cv_split"]),
                             adv["cv_mode"], adv["spoof_leader"], colluder)
    part = adv["partition"]
    if part["ratio"] > 0 and part["end"] > part["start"]:
        k = int(round(part["ratio"] * full_nodes))
        nb = min(len(ids), int(round(part["byzantine_share"] * k)))
        honest = [i for i in range(full_nodes) if i not in script.byzantine]
        cut = [int(i) for i in rng.choice(ids, size=nb, replace=False)] if nb else []
        cut += [int(i) for i in rng.choice(honest, size=min(k - nb, len(honest)), replace=False)]
        rest = set(range(full_nodes)) - set(cut)
        script.partition = Partition(float(part["start"]), float(part["end"]), [set(cut), rest])
    return script


class Coalition:
    """State shared by the Byzantine nodes of one run."""

    def __init__(self, script: AdversaryScript, rng: np.random.Generator):
        self.script = script
        self.members = script.ids
        self.rng = rng
        self.splits: dict = {}  # (h, r) -> {block hash: peers that received it}

    def u(self) -> float:
        return float(self.rng.random())


class ByzantineNode(ConsensusNode):
    def __init__(self, node_id, keys, ctx, params, behaviours, coalition: Coalition):
        super().__init__(node_id, keys, ctx, params)
        self.behaviours = frozenset(behaviours)
        self.coalition = coalition
        self.honest_node = False

    # which behaviours are live right now
    def active(self, name: str) -> bool:
        if "spoofing" in self.behaviours and self.now >= self.coalition.script.switch_time:
            if name == "cv":
                return True
            if name in ("nbc", "wbc"):
                return name == self.coalition.script.spoof_leader
        return name in self.behaviours

    def _peers(self) -> list:
        return [m for m in self.committee.members if m != self.id]

    # ---- leader side ------------------------------------------------------------

    def _propose(self, r):
        if self.active("nbc"):
            return
        if self.active("wbc") or (self.active("collusion") and self.id == self.coalition.script.colluder):
            bad = assemble_block((), self.tip_hash, self.height + 1, self.id, self.keys.sk,
                                 self._last_proof(), round=r, timestamp=self.now, backend=self.params.backend)
            self._broadcast_proposal(bad, r, None, -1)
            return
        if self.active("cp"):
            lp = self._last_proof()
            a = self.ctx.make_block(self, self.height, r, lp, self.now)
            b = self.ctx.make_block(self, self.height, r, lp, self.now + 1e-6)
            peers = self._peers()
            order = self.coalition.rng.permutation(len(peers))
            side_a = tuple(peers[i] for i in order[: len(peers) // 2])
            side_b = tuple(peers[i] for i in order[len(peers) // 2:])
            self.coalition.splits[(self.height, r)] = {a.hash: side_a, b.hash: side_b}
            self._broadcast_proposal(a, r, None, -1, to=side_a)
            self._broadcast_proposal(b, r, None, -1, to=side_b)
            return
        super()._propose(r)

    # ---- voter side ---------------------------------------------------------------

    def _choose_prevote(self, p):
        if self.active("vol"):
            return p.block_hash
        return super()._choose_prevote(p)

    def _fallback_prevote(self):
        if self.active("vol"):
            return NIL
        return super()._fallback_prevote()

    def _on_block_invalid(self, p, verdict):
        if (self.active("collusion") and p.sender in self.coalition.members and p.round == self.round
                and self.step == "propose" and self.proposals.get(p.round) is p):
            self._enter_prevote(p.round, p.block_hash)
            return
        super()._on_block_invalid(p, verdict)

    def _enter_prevote(self, r, value):
        h = self.height
        super()._enter_prevote(r, value)
        if self.active("vol") and value != NIL and self.height == h and self.step == "prevote":
            self._enter_precommit(r, value)

    def _send_vote(self, vote):
        split = self.coalition.splits.get((vote.height, vote.round))
        if split and self.active("cp"):
            first = None
            for value, side in split.items():
                v = self._cast(vote.kind, vote.round, value)
                self._send(v, tuple(s for s in side if s != self.id))
                first = first or v
            self._on_vote(first, local=True)
            return
        if self.active("cv"):
            lite = self.coalition.script.cv_mode == "lite" or "spoofing" in self.behaviours
            if self.coalition.u() < self.coalition.script.cv_split:
                other = NIL if vote.value != NIL else h0(b"bogus" + vote.signing_bytes())
                alt = self._cast(vote.kind, vote.round, other)
                peers = self._peers()
                if lite:
                    k = int(self.coalition.rng.integers(len(peers))) if peers else 0
                    conflicted = {peers[k]} if peers else set()
                else:
                    perm = self.coalition.rng.permutation(len(peers))
                    conflicted = {peers[i] for i in perm[: len(peers) // 2]}
                self._send(vote, tuple(p for p in peers if p not in conflicted))
                if conflicted:
                    self._send(alt, tuple(conflicted))
                self._on_vote(vote, local=True)
                return
        super()._send_vote(vote)
