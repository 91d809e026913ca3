"""Misbehaviour detection over archived consensus messages.

All detectors are pure functions over what honest nodes received. They only
accuse a validator when the archive holds the validator's own signed
messages that prove the fault, so a validator whose messages never reached
anyone honest cannot be accused.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..ledger import NIL, encode
from ..ledger.validation import quorum

PREVOTE, PRECOMMIT = "prevote", "precommit"


@dataclass(frozen=True)
class Misbehavior:
    kind: str  # cp, cv, wbc, nbc, vol
    accused: int
    height: int
    round: int
    items: tuple = ()  # the signed messages proving it
    detail: str = ""

    @property
    def key(self) -> tuple:
        return (self.kind, self.accused, self.height, self.round, self.detail)

    def encode(self) -> bytes:
        return encode("evidence", self.kind, self.accused, self.height, self.round, self.detail,
                      tuple(x.encode() for x in self.items if hasattr(x, "encode")))


@dataclass
class HeightArchive:
    """Union of what the honest validators received for one height."""
    height: int
    votes: list = field(default_factory=list)
    proposals: list = field(default_factory=list)
    pols: list = field(default_factory=list)
    no_proposal: dict = field(default_factory=dict)  # round -> set of node ids whose propose timer expired
    invalid: list = field(default_factory=list)  # (round, leader, verdict, proposal)
    complete: bool = True

    def merge(self, archive, node_id):
        """Fold one node's Archive for this height into the union."""
        h = self.height
        self.votes.extend(archive.votes.get(h, ()))
        self.proposals.extend(archive.proposals.get(h, ()))
        self.pols.extend(archive.pols.get(h, ()))
        for r in archive.no_proposal.get(h, ()):
            self.no_proposal.setdefault(r, set()).add(node_id)
        self.invalid.extend(archive.invalid.get(h, ()))


def detect_equivocation(votes=(), proposals=()) -> list:
    """cp: one leader, two block proposals for one (h, r). cv: one validator, two values for one (h, r, type)."""
    out = []
    first_prop: dict = {}
    seen = set()
    for p in proposals:
        k = (p.sender, p.height, p.round)
        q = first_prop.setdefault(k, p)
        if q.block_hash != p.block_hash and k not in seen:
            seen.add(k)
            out.append(Misbehavior("cp", p.sender, p.height, p.round, (q, p)))
    first_vote: dict = {}
    seen = set()
    for v in votes:
        k = (v.sender, v.kind, v.height, v.round)
        w = first_vote.setdefault(k, v)
        if w.value != v.value and k not in seen:
            seen.add(k)
            out.append(Misbehavior("cv", v.sender, v.height, v.round, (w, v), detail=v.kind))
    return out


def detect_block_faults(height: int, committee, invalid=(), no_proposal=None, proposals=(),
                        min_timeouts: int = 1) -> list:
    """wbc for designated-leader proposals that failed validation; nbc for rounds
    in which honest validators timed out and nobody honest ever saw the leader's proposal."""
    out = []
    seen = set()
    for rnd, leader, verdict, prop in invalid:
        if leader != committee.leader_for(height, rnd) or (leader, rnd) in seen:
            continue
        seen.add((leader, rnd))
        out.append(Misbehavior("wbc", leader, height, rnd, (prop,), detail=getattr(verdict, "rule", "") or ""))
    got = {(p.sender, p.round) for p in proposals}
    for rnd, nodes in sorted((no_proposal or {}).items()):
        leader = committee.leader_for(height, rnd)
        if len(nodes) >= min_timeouts and (leader, rnd) not in got:
            out.append(Misbehavior("nbc", leader, height, rnd, ()))
    return out


def detect_lock_violation(votes, committee_size: int, pols=(), complete: bool = True) -> tuple[list, bool]:
    """Match each validator's prevotes against its latest precommit.

    Returns (evidence, partial). A validator locks when it precommits a
    block. A later prevote for anything else must be preceded by a PoL for
    a different value at a round after the lock; a non-nil precommit must
    be backed by a PoL for that value in the same round. Absence of a PoL
    is only conclusive over a complete archive, so an incomplete one
    yields no accusations and partial=True.
    """
    if not complete:
        return [], True
    q = quorum(committee_size)
    support: dict = {}  # (round, value) -> set of prevoters
    mine: dict = {}  # sender -> {round: {"prevote": [...], "precommit": [...]}}
    for v in votes:
        if v.kind == PREVOTE:
            support.setdefault((v.round, v.value), set()).add(v.sender)
        mine.setdefault(v.sender, {}).setdefault(v.round, {PREVOTE: [], PRECOMMIT: []})[v.kind].append(v)
    pol_at = {k for k, s in support.items() if len(s) >= q}
    pol_at |= {(p.round, p.value) for p in pols}
    out = []
    for sender, rounds in mine.items():
        lock = None  # the precommit that locked it
        for r in sorted(rounds):
            for pv in _distinct(rounds[r][PREVOTE]):
                if lock is None or pv.value == lock.value:
                    continue
                unlocked = any(lock.round < rr <= r and val != lock.value for rr, val in pol_at)
                if not unlocked:
                    out.append(Misbehavior("vol", sender, pv.height, r, (lock, pv), detail="locking"))
                    break
            for pc in _distinct(rounds[r][PRECOMMIT]):
                if pc.value == NIL:
                    continue
                if (r, pc.value) not in pol_at:
                    out.append(Misbehavior("vol", sender, pc.height, r, (pc,), detail="unlocking"))
                lock = pc
    return out, False


def _distinct(votes):
    seen = set()
    for v in votes:
        if v.value not in seen:
            seen.add(v.value)
            yield v


def analyze_height(archive: HeightArchive, committee, min_timeouts: int = 1) -> list:
    """Run every detector over one height's union archive."""
    ev = detect_equivocation(archive.votes, archive.proposals)
    ev += detect_block_faults(archive.height, committee, archive.invalid, archive.no_proposal,
                              archive.proposals, min_timeouts)
    vol, _ = detect_lock_violation(archive.votes, committee.size, archive.pols, archive.complete)
    return ev + vol
