"""Per-(height, round, type) vote bookkeeping."""
from __future__ import annotations

from dataclasses import dataclass

from ..ledger.validation import quorum
from .messages import PoL


class InvariantViolation(AssertionError):
    """Two values both exceed the quorum: the fault model itself was broken."""


class VoteSet:
    """Votes of one type for one (height, round); one vote per validator counts."""

    __slots__ = ("z", "q", "by_sender", "counts", "conflicts")

    def __init__(self, z: int):
        self.z = z
        self.q = quorum(z)
        self.by_sender: dict = {}
        self.counts: dict = {}
        self.conflicts: list = []

    def add(self, vote) -> bool:
        """Record vote; returns False if the sender already voted.

        A second vote with a different value is kept aside as a conflict
        (equivocation evidence) and does not count.
        """
        prev = self.by_sender.get(vote.sender)
        if prev is not None:
            if prev.value != vote.value:
                self.conflicts.append((prev, vote))
            return False
        self.by_sender[vote.sender] = vote
        self.counts[vote.value] = self.counts.get(vote.value, 0) + 1
        return True

    def quorum_value(self):
        """Value holding more than 2/3 of the committee, or None."""
        hit = None
        for value, n in self.counts.items():
            if n >= self.q:
                if hit is not None:
                    raise InvariantViolation("two values exceed the quorum in one vote set")
                hit = value
        return hit

    def votes_for(self, value) -> list:
        return [v for v in self.by_sender.values() if v.value == value]

    def __len__(self):
        return len(self.by_sender)


@dataclass(frozen=True)
class TallyResult:
    outcome: str  # "pol" or "none"
    value: bytes | None = None
    pol: PoL | None = None


def tally(votes, committee, backend="sim") -> TallyResult:
    """Deduplicate votes per validator and report a PoL if one value has a quorum."""
    vs = VoteSet(committee.size)
    for v in votes:
        vs.add(v)
    value = vs.quorum_value()
    if value is None:
        return TallyResult("none")
    return TallyResult("pol", value, PoL.from_votes(vs.votes_for(value), committee, backend))
