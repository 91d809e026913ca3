"""One validator's Tendermint-style state machine.

The node is event driven: start(), deliver(msg) and timeout(...) mutate only
this node's state and return the outputs the environment must act on
(messages to send, timers to arm, commits to record, evidence seen). The
environment (the simulator) owns the clock and the network.

Rounds follow propose -> prevote -> precommit. Locking: precommitting a
block locks the node on it; a locked node keeps prevoting its locked block
until it sees a proof-of-lock (PoL, > 2/3 prevotes) for some other value at
a later round. Quorums are strict: more than floor(2Z/3) votes.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..crypto import MerkleTree
from ..ledger import GENESIS_HASH, NIL, chunk_block, check_chunk, reassemble, validate_block
from ..ledger.validation import Verdict, quorum
from .messages import (PRECOMMIT, PREVOTE, BlockPart, CommitCert, PoL, Proposal, SyncRequest, Vote,
                       build_last_proof, last_proof_verifications, make_proposal, make_vote, verify_signed)
from .tally import VoteSet

PROPOSE_STEP, PREVOTE_STEP, PRECOMMIT_STEP, COMMIT_STEP = "propose", "prevote", "precommit", "commit"


@dataclass
class ConsensusParams:
    propose_timeout: float = 6.0
    timeout_increment: float = 0.5
    prevote_timeout: float = 3.0
    precommit_timeout: float = 3.0
    commit_wait: float = 0.001
    sync_delay: float = 2.0
    chunk_size: int = 65536
    aggregate_last_commit: bool = True
    record_last_votes: bool = True
    backend: str = "sim"
    max_buffer: int = 20000

    def propose_timeout_for(self, round: int) -> float:
        return self.propose_timeout + round * self.timeout_increment


# ---- outputs -------------------------------------------------------------

@dataclass(frozen=True)
class Send:
    msg: object
    to: tuple | None = None  # None: every other member of the committee at msg height


@dataclass(frozen=True)
class Timer:
    delay: float
    kind: str
    height: int
    round: int


@dataclass(frozen=True)
class Commit:
    height: int
    block: object
    round: int
    precommits: tuple
    time: float


@dataclass(frozen=True)
class Evidence:
    kind: str  # cp, cv, wbc
    accused: int
    height: int
    round: int
    items: tuple


# ---- environment hooks ---------------------------------------------------

class NodeContext:
    """What a node needs from its surroundings. The simulator subclasses it."""

    def committee(self, height: int):
        raise NotImplementedError

    def make_block(self, node, height: int, round: int, last_proof, now: float):
        from ..ledger import assemble_block
        return assemble_block((), node.tip_hash, height, node.id, node.keys.sk, last_proof, round=round,
                              timestamp=now, backend=node.params.backend)

    def chunk(self, block, chunk_size: int):
        return chunk_block(block, chunk_size)

    def reassemble(self, chunks, root):
        return reassemble(chunks, root)

    tx_check = None

    def verify(self, msg, pk: bytes, backend: str) -> bool:
        return verify_signed(msg, pk, backend)

    def store_votes(self, data: bytes) -> bytes:
        return b""


@dataclass
class Archive:
    """Everything this node received, kept for forensics."""
    votes: dict = field(default_factory=dict)  # height -> [Vote]
    proposals: dict = field(default_factory=dict)  # height -> [Proposal]
    pols: dict = field(default_factory=dict)  # height -> [PoL] carried by proposals
    no_proposal: dict = field(default_factory=dict)  # height -> {round} propose timed out empty-handed
    invalid: dict = field(default_factory=dict)  # height -> [(round, leader, Verdict, Proposal)]

    def prune(self, below: int):
        for d in (self.votes, self.proposals, self.pols, self.no_proposal, self.invalid):
            for h in [h for h in d if h < below]:
                del d[h]


@dataclass
class LastCommitInfo:
    height: int
    round: int
    value: bytes
    votes: dict  # sender -> precommit


class ConsensusNode:
    def __init__(self, node_id: int, keys, ctx: NodeContext, params: ConsensusParams | None = None):
        self.id = node_id
        self.keys = keys
        self.ctx = ctx
        self.params = params or ConsensusParams()
        self.archive = Archive()
        self.committed: dict = {}  # height -> (block, round, precommits)
        self.tip_hash = GENESIS_HASH
        self.tip_height = 0
        self.last_commit: LastCommitInfo | None = None
        self.height = 0
        self.round = 0
        self.step = None
        self.passive = True
        self.verifications = 0
        self.messages_in = 0
        self.future: list = []
        self.now = 0.0
        self._out: list = []
        self._reset_height_state()

    # ---- public entry points ------------------------------------------------

    def start(self, now: float = 0.0) -> list:
        self.now = now
        self._start_height(1)
        return self._flush()

    def deliver(self, msg, now: float) -> list:
        self.now = now
        self.messages_in += 1
        self._dispatch(msg)
        return self._flush()

    def timeout(self, kind: str, height: int, round: int, now: float) -> list:
        self.now = now
        self._on_timeout(kind, height, round)
        return self._flush()

    def step_event(self, event, now: float) -> list:
        """Uniform entry point: event is a message or a Timer."""
        if isinstance(event, Timer):
            return self.timeout(event.kind, event.height, event.round, now)
        return self.deliver(event, now)

    def sync_commit(self, height: int, block, round: int, precommits, now: float) -> list:
        """Adopt a block committed elsewhere (used for nodes outside the committee)."""
        self.now = now
        if height != self.tip_height + 1:
            return self._flush()
        self._record_commit(height, block, round, tuple(precommits))
        self._start_height(height + 1)
        return self._flush()

    @property
    def locked_round(self) -> int:
        return self._locked_round

    @property
    def locked_value(self):
        return self._locked_value

    # ---- bookkeeping ----------------------------------------------------------

    def _flush(self) -> list:
        out, self._out = self._out, []
        return out

    def _reset_height_state(self):
        self.round = 0
        self.step = None
        self._locked_value = None
        self._locked_round = -1
        self._locked_block = None
        self._locked_pol = None
        self.prevotes: dict = {}
        self.precommits: dict = {}
        self.proposals: dict = {}
        self.proposal_pols: dict = {}
        self.pols: dict = {}
        self.blocks: dict = {}
        self.invalid: dict = {}
        self.parts: dict = {}
        self.round_senders: dict = {}
        self._sync_peers: list = []
        self._sync_armed = False

    def _send(self, msg, to=None):
        self._out.append(Send(msg, to))

    def _timer(self, delay, kind, round):
        self._out.append(Timer(delay, kind, self.height, round))

    def _start_height(self, height: int):
        self.height = height
        self._reset_height_state()
        try:
            self.committee = self.ctx.committee(height)
        except KeyError:
            self.committee = None
        if self.committee is None or self.id not in self.committee:
            self.passive = True
            return
        self.passive = False
        self.q = quorum(self.committee.size)
        self.f = self.committee.max_faulty
        self._enter_round(0)
        if self.height != height:
            return
        buffered, self.future = self.future, []
        for msg in buffered:
            if self.height == height and msg.height == height:
                self._dispatch(msg)
            elif msg.height > self.height:
                self.future.append(msg)

    def is_leader(self, round: int) -> bool:
        return self.committee.leader_for(self.height, round) == self.id

    # ---- message dispatch -------------------------------------------------

    def _dispatch(self, msg):
        if isinstance(msg, SyncRequest):
            self._on_sync_request(msg)
            return
        if isinstance(msg, CommitCert):
            self._on_commit_cert(msg)
            return
        h = msg.height
        if h < self.height:
            self._on_past(msg)
            return
        if h > self.height or self.passive:
            if h > self.height:
                self._buffer_future(msg)
            return
        if isinstance(msg, Vote):
            self._on_vote(msg)
        elif isinstance(msg, Proposal):
            self._on_proposal(msg)
        elif isinstance(msg, BlockPart):
            self._on_part(msg)

    def _buffer_future(self, msg):
        if len(self.future) < self.params.max_buffer:
            self.future.append(msg)
        sender = getattr(msg, "sender", None)
        if sender is not None and sender not in self._sync_peers:
            self._sync_peers.append(sender)
        if not self._sync_armed and not self.passive:
            self._sync_armed = True
            self._timer(self.params.sync_delay, "sync", self.round)

    def _on_past(self, msg):
        if isinstance(msg, Vote):
            self.archive.votes.setdefault(msg.height, []).append(msg)
            lc = self.last_commit
            if (msg.kind == PRECOMMIT and lc is not None and msg.height == lc.height and msg.round == lc.round
                    and msg.value == lc.value and msg.sender not in lc.votes):
                if self._verify(msg):
                    lc.votes[msg.sender] = msg
        elif isinstance(msg, Proposal):
            self.archive.proposals.setdefault(msg.height, []).append(msg)

    def _verify(self, msg) -> bool:
        self.verifications += 1
        try:
            pk = self.committee.pk_of(msg.sender)
        except KeyError:
            return False
        return self.ctx.verify(msg, pk, self.params.backend)

    # ---- votes ----------------------------------------------------------------

    def _on_vote(self, vote: Vote, local: bool = False):
        if vote.sender not in self.committee:
            return
        if not local and not self._verify(vote):
            return
        self.archive.votes.setdefault(vote.height, []).append(vote)
        sets = self.prevotes if vote.kind == PREVOTE else self.precommits
        vs = sets.get(vote.round)
        if vs is None:
            vs = sets[vote.round] = VoteSet(self.committee.size)
        n_conflicts = len(vs.conflicts)
        if not vs.add(vote):
            if len(vs.conflicts) > n_conflicts:
                a, b = vs.conflicts[-1]
                self._out.append(Evidence("cv", vote.sender, vote.height, vote.round, (a, b)))
            return
        h = self.height
        if vote.round > self.round:
            self._note_round_sender(vote.round, vote.sender)
            if self.height != h:
                return
        if vote.kind == PREVOTE:
            self._check_prevotes(vote.round)
        else:
            self._check_precommits(vote.round)

    def _note_round_sender(self, round: int, sender: int):
        s = self.round_senders.setdefault(round, set())
        s.add(sender)
        if len(s) > self.f and round > self.round and self.step != COMMIT_STEP:
            self._enter_round(round)

    def _check_prevotes(self, r: int):
        vs = self.prevotes.get(r)
        if vs is None:
            return
        value = vs.quorum_value()
        if value is None:
            return
        if r not in self.pols:
            self.pols[r] = PoL.from_votes(vs.votes_for(value), self.committee, self.params.backend)
        # unlock on a PoL for some other value at a later round
        if self._locked_value is not None and value != self._locked_value and self._locked_round < r <= self.round:
            self._unlock()
        if r == self.round and self.step == PREVOTE_STEP:
            if value == NIL:
                self._unlock()
                self._enter_precommit(r, NIL)
            elif value in self.blocks:
                self._lock(value, r)
                self._enter_precommit(r, value)
            # block unknown: wait for it until the prevote timeout

    def _check_precommits(self, r: int):
        vs = self.precommits.get(r)
        if vs is None or self.step == COMMIT_STEP:
            return
        value = vs.quorum_value()
        if value is None:
            return
        if value != NIL:
            if value in self.blocks:
                self._commit(value, r)
        elif r == self.round:
            self._enter_round(r + 1)

    def _lock(self, value, r):
        self._locked_value = value
        self._locked_round = r
        self._locked_block = self.blocks[value]
        self._locked_pol = self.pols.get(r)

    def _unlock(self):
        self._locked_value = None
        self._locked_round = -1
        self._locked_block = None
        self._locked_pol = None

    # ---- proposals and block parts ------------------------------------------

    def _on_proposal(self, p: Proposal, local: bool = False):
        if p.sender != self.committee.leader_for(p.height, p.round):
            return
        if not local and not self._verify(p):
            return
        self.archive.proposals.setdefault(p.height, []).append(p)
        prev = self.proposals.get(p.round)
        if prev is not None:
            if prev.block_hash != p.block_hash:
                self._out.append(Evidence("cp", p.sender, p.height, p.round, (prev, p)))
            return
        self.proposals[p.round] = p
        if p.pol is not None and not local:
            self.verifications += 1
            pol = p.pol
            if (pol.height == p.height and pol.round == p.pol_round and pol.value == p.block_hash
                    and pol.round < p.round and pol.verify(self.committee, self.params.backend)):
                self.proposal_pols[p.round] = pol
                self.archive.pols.setdefault(p.height, []).append(pol)
        elif p.pol is not None:
            self.proposal_pols[p.round] = p.pol
        h = self.height
        if p.round > self.round:
            self._note_round_sender(p.round, p.sender)
            if self.height != h:
                return
        self._try_assemble(p)

    def _on_part(self, part: BlockPart):
        parts = self.parts.setdefault(part.root_b, {})
        if part.chunk.index in parts:
            return
        parts[part.chunk.index] = part.chunk
        for p in self.proposals.values():
            if p.root_b == part.root_b:
                self._try_assemble(p)
                return

    def _try_assemble(self, p: Proposal):
        if p.block_hash in self.blocks:
            self._on_block_ready(p, self.blocks[p.block_hash])
            return
        if p.block_hash in self.invalid:
            self._on_block_invalid(p, self.invalid[p.block_hash])
            return
        parts = self.parts.get(p.root_b, {})
        if len(parts) < p.n_chunks:
            return
        good = [c for c in parts.values() if check_chunk(c, p.root_b)]
        if len(good) < p.n_chunks:
            for c in parts.values():
                if not check_chunk(c, p.root_b):
                    del parts[c.index]
            return
        try:
            block = self.ctx.reassemble(good, p.root_b)
        except Exception as exc:
            self._mark_invalid(p, Verdict(False, "encoding", str(exc)))
            return
        if block.hash != p.block_hash:
            self._mark_invalid(p, Verdict(False, "this_hash", "block does not match proposal"))
            return
        verdict = self._validate(block, p)
        if not verdict.ok:
            self._mark_invalid(p, verdict)
            return
        self.blocks[block.hash] = block
        self._on_block_ready(p, block)

    def _validate(self, block, p: Proposal) -> Verdict:
        prev_committee = None
        if self.height > 1:
            try:
                prev_committee = self.ctx.committee(self.height - 1)
            except KeyError:
                prev_committee = None
        # proposer signature, the LastProof and one check per transaction
        self.verifications += 1 + last_proof_verifications(block.header.last_proof) + len(block.txs)
        verdict = validate_block(block, self.tip_hash, self.tip_height, self.committee, prev_committee,
                                 tx_check=self.ctx.tx_check, backend=self.params.backend)
        if not verdict.ok:
            return verdict
        hr = block.header.round
        if hr > p.round or (hr < p.round and p.round not in self.proposal_pols):
            return Verdict(False, "round", f"block of round {hr} proposed in round {p.round} without PoL")
        return verdict

    def _mark_invalid(self, p: Proposal, verdict: Verdict):
        self.invalid[p.block_hash] = verdict
        self._on_block_invalid(p, verdict)

    def _on_block_invalid(self, p: Proposal, verdict: Verdict):
        rec = self.archive.invalid.setdefault(p.height, [])
        if not any(x[0] == p.round and x[3] is p for x in rec):
            rec.append((p.round, p.sender, verdict, p))
            self._out.append(Evidence("wbc", p.sender, p.height, p.round, (p,)))
        if p.round == self.round and self.step == PROPOSE_STEP and self.proposals.get(p.round) is p:
            self._enter_prevote(p.round, self._fallback_prevote())

    def _on_block_ready(self, p: Proposal, block):
        h = self.height
        for r, vs in list(self.precommits.items()):
            if self.step != COMMIT_STEP and vs.quorum_value() == block.hash:
                self._commit(block.hash, r)
                return
        if p.round == self.round and self.step == PROPOSE_STEP and self.proposals.get(p.round) is p:
            self._enter_prevote(p.round, self._choose_prevote(p))
        if self.height == h and self.step == PREVOTE_STEP:
            self._check_prevotes(self.round)

    def _choose_prevote(self, p: Proposal) -> bytes:
        if self._locked_value is None or self._locked_value == p.block_hash:
            return p.block_hash
        pol = self.proposal_pols.get(p.round)
        if pol is not None and pol.round > self._locked_round:
            self._unlock()
            return p.block_hash
        return self._locked_value

    def _fallback_prevote(self) -> bytes:
        return self._locked_value if self._locked_value is not None else NIL

    # ---- steps ---------------------------------------------------------------

    def _enter_round(self, r: int):
        if self.step == COMMIT_STEP:
            return
        h = self.height
        self.round = r
        self.step = PROPOSE_STEP
        self._timer(self.params.propose_timeout_for(r), "propose", r)
        if self.is_leader(r) and r not in self.proposals:
            self._propose(r)
        elif r in self.proposals:
            self._try_assemble(self.proposals[r])
        for rr in sorted(set(self.prevotes) | set(self.precommits)):
            if self.height != h or self.round != r:
                return
            self._check_prevotes(rr)
            if self.height != h:
                return
            self._check_precommits(rr)

    def _propose(self, r: int):
        if self._locked_block is not None:
            block, pol, pol_round = self._locked_block, self._locked_pol, self._locked_round
        else:
            block = self.ctx.make_block(self, self.height, r, self._last_proof(), self.now)
            pol, pol_round = None, -1
        self._broadcast_proposal(block, r, pol, pol_round)

    def _broadcast_proposal(self, block, r, pol, pol_round, to=None):
        chunks, root = self.ctx.chunk(block, self.params.chunk_size)
        p = make_proposal(self.height, r, block.hash, root, len(chunks), block.size(), pol_round, self.id,
                          self.keys.sk, pol, self.params.backend)
        self._send(p, to)
        for c in chunks:
            self._send(BlockPart(self.height, r, root, c, self.id), to)
        self.blocks[block.hash] = block
        self._on_proposal(p, local=True)
        return p

    def _last_proof(self):
        lc = self.last_commit
        if lc is None or self.height == 1:
            return None
        root = ptr = b""
        if self.params.record_last_votes:
            votes = self.archive.votes.get(lc.height, [])
            leaves = [v.encode() for v in votes] or [b""]
            root = MerkleTree(leaves).root
            ptr = self.ctx.store_votes(b"".join(leaves))
        prev_committee = self.ctx.committee(lc.height)
        return build_last_proof(lc.height, lc.round, lc.value, list(lc.votes.values()), prev_committee,
                                self.params.aggregate_last_commit, root, ptr, self.params.backend)

    def _cast(self, kind, r, value) -> Vote:
        return make_vote(kind, self.height, r, value, self.id, self.keys.sk, self.params.backend)

    def _send_vote(self, vote: Vote):
        self._send(vote)
        self._on_vote(vote, local=True)

    def _enter_prevote(self, r: int, value: bytes):
        self.step = PREVOTE_STEP
        self._timer(self.params.prevote_timeout, "prevote", r)
        self._send_vote(self._cast(PREVOTE, r, value))

    def _enter_precommit(self, r: int, value: bytes):
        self.step = PRECOMMIT_STEP
        self._timer(self.params.precommit_timeout, "precommit", r)
        self._send_vote(self._cast(PRECOMMIT, r, value))

    def _commit(self, value: bytes, r: int, votes=None):
        block = self.blocks[value]
        if votes is None:
            votes = tuple(self.precommits[r].votes_for(value))
        self._record_commit(self.height, block, r, tuple(votes))
        self.step = COMMIT_STEP
        self._timer(self.params.commit_wait, "new_height", r)

    def _record_commit(self, height, block, r, votes):
        self.committed[height] = (block, r, votes)
        self.tip_hash, self.tip_height = block.hash, height
        self.last_commit = LastCommitInfo(height, r, block.hash, {v.sender: v for v in votes})
        self._out.append(Commit(height, block, r, votes, self.now))

    # ---- timeouts --------------------------------------------------------------

    def _on_timeout(self, kind, height, r):
        if kind == "new_height":
            if height == self.height and self.step == COMMIT_STEP:
                self._start_height(height + 1)
            return
        if height != self.height or self.passive:
            return
        if kind == "sync":
            self._on_sync_timeout()
            return
        if r != self.round:
            return
        if kind == "propose" and self.step == PROPOSE_STEP:
            p = self.proposals.get(r)
            if p is None:
                self.archive.no_proposal.setdefault(height, set()).add(r)
            self._enter_prevote(r, self._fallback_prevote())
        elif kind == "prevote" and self.step == PREVOTE_STEP:
            self._enter_precommit(r, NIL)
        elif kind == "precommit" and self.step == PRECOMMIT_STEP:
            self._enter_round(r + 1)

    # ---- catch-up ----------------------------------------------------------------

    def _on_sync_timeout(self):
        self._sync_armed = False
        if self.step == COMMIT_STEP or not self._sync_peers:
            return
        peer = self._sync_peers.pop(0)
        self._sync_peers.append(peer)
        self._send(SyncRequest(self.height, self.id), (peer,))
        self._sync_armed = True
        self._timer(self.params.sync_delay, "sync", self.round)

    def _on_sync_request(self, req: SyncRequest):
        got = self.committed.get(req.height)
        if got is None:
            return
        block, r, votes = got
        self._send(CommitCert(req.height, r, block, votes, self.id), (req.sender,))

    def _on_commit_cert(self, cert: CommitCert):
        if cert.height != self.height or self.passive or self.step == COMMIT_STEP:
            return
        block = cert.block
        senders = {v.sender for v in cert.precommits}
        if len(senders) < self.q or len(senders) != len(cert.precommits):
            return
        for v in cert.precommits:
            if v.kind != PRECOMMIT or v.height != cert.height or v.round != cert.round or v.value != block.hash:
                return
            if not self._verify(v):
                return
        prev_committee = self.ctx.committee(self.height - 1) if self.height > 1 else None
        verdict = validate_block(block, self.tip_hash, self.tip_height, self.committee, prev_committee,
                                 tx_check=self.ctx.tx_check, backend=self.params.backend)
        if not verdict.ok:
            return
        self.blocks[block.hash] = block
        for v in cert.precommits:
            self.archive.votes.setdefault(v.height, []).append(v)
        self._commit(block.hash, cert.round, cert.precommits)
