"""Consensus message types and their signed byte forms."""
from __future__ import annotations

from dataclasses import dataclass

from ..crypto import AggregateSignature, aggregate, aggregation_weights, sign, verify, verify_aggregate
from ..ledger import NIL, Block, Chunk, LastProof, encode, vote_bytes
from ..ledger.validation import quorum

PROPOSAL = "proposal"
PREVOTE = "prevote"
PRECOMMIT = "precommit"

# Nominal sizes used for byte accounting, those of BLS12-381 (signature in
# G2, key in G1) whatever backend actually signs.
SIG_BYTES = 96
PK_BYTES = 48
HEADER_BYTES = 24  # type, height, round, sender


@dataclass(frozen=True, eq=False)
class Vote:
    kind: str
    height: int
    round: int
    value: bytes
    sender: int
    signature: bytes = b""

    def signing_bytes(self) -> bytes:
        return vote_bytes(self.kind, self.height, self.round, self.value)

    def wire_size(self, committee_size: int = 0) -> int:
        return HEADER_BYTES + 32 + SIG_BYTES

    def encode(self) -> bytes:
        # votes are re-encoded for every LastVotes tree; cache on the (frozen) instance
        enc = self.__dict__.get("_enc")
        if enc is None:
            enc = encode(self.kind, self.height, self.round, self.value, self.sender, self.signature)
            self.__dict__["_enc"] = enc
        return enc

    @property
    def is_nil(self) -> bool:
        return self.value == NIL


def make_vote(kind: str, height: int, round: int, value: bytes, sender: int, sk: int, backend="sim") -> Vote:
    return Vote(kind, height, round, value, sender, sign(vote_bytes(kind, height, round, value), sk, backend))


@dataclass(frozen=True, eq=False)
class PoL:
    """More than two thirds of prevotes for one value in one round."""
    height: int
    round: int
    value: bytes
    signers: tuple
    sigma: bytes
    votes: tuple = ()

    @classmethod
    def from_votes(cls, votes, committee, backend="sim") -> "PoL":
        votes = sorted(votes, key=lambda v: committee.index[v.sender])
        v0 = votes[0]
        signers = tuple(v.sender for v in votes)
        agg = aggregate([v.signature for v in votes], [committee.pk_of(s) for s in signers], backend)
        return cls(v0.height, v0.round, v0.value, signers, agg.sigma, tuple(votes))

    def verify(self, committee, backend="sim") -> bool:
        if len(set(self.signers)) != len(self.signers) or len(self.signers) < quorum(committee.size):
            return False
        if any(s not in committee.index for s in self.signers):
            return False
        pks = tuple(committee.pk_of(s) for s in self.signers)
        agg = AggregateSignature(self.sigma, pks, aggregation_weights(pks, backend))
        return verify_aggregate(agg, vote_bytes(PREVOTE, self.height, self.round, self.value), backend)

    def wire_size(self, committee_size: int) -> int:
        return 16 + 32 + SIG_BYTES + (committee_size + 7) // 8

    def encode(self) -> bytes:
        return encode("pol", self.height, self.round, self.value, tuple(self.signers), self.sigma)


@dataclass(frozen=True, eq=False)
class Proposal:
    height: int
    round: int
    block_hash: bytes
    root_b: bytes  # Merkle root over the block's chunks
    n_chunks: int
    block_size: int
    pol_round: int
    sender: int
    pol: PoL | None = None
    signature: bytes = b""

    kind = PROPOSAL

    def signing_bytes(self) -> bytes:
        return encode(PROPOSAL, self.height, self.round, self.block_hash, self.root_b, self.n_chunks,
                      self.pol_round)

    def wire_size(self, committee_size: int = 0) -> int:
        n = HEADER_BYTES + 32 + 32 + 12 + SIG_BYTES
        if self.pol is not None:
            n += self.pol.wire_size(committee_size)
        return n

    def encode(self) -> bytes:
        pol = None if self.pol is None else self.pol.encode()
        return encode(PROPOSAL, self.height, self.round, self.block_hash, self.root_b, self.n_chunks,
                      self.pol_round, self.sender, pol, self.signature)


def make_proposal(height, round, block_hash, root_b, n_chunks, block_size, pol_round, sender, sk,
                  pol=None, backend="sim") -> Proposal:
    p = Proposal(height, round, block_hash, root_b, n_chunks, block_size, pol_round, sender, pol)
    return Proposal(height, round, block_hash, root_b, n_chunks, block_size, pol_round, sender, pol,
                    sign(p.signing_bytes(), sk, backend))


def verify_signed(msg, pk: bytes, backend="sim") -> bool:
    return verify(msg.signature, msg.signing_bytes(), pk, backend)


@dataclass(frozen=True, eq=False)
class BlockPart:
    """One chunk of a proposed block; authenticated through root_b."""
    height: int
    round: int
    root_b: bytes
    chunk: Chunk
    sender: int

    kind = "part"

    def wire_size(self, committee_size: int = 0) -> int:
        return HEADER_BYTES + 32 + self.chunk.wire_size()


@dataclass(frozen=True, eq=False)
class SyncRequest:
    height: int
    sender: int

    kind = "sync_request"

    def wire_size(self, committee_size: int = 0) -> int:
        return HEADER_BYTES


@dataclass(frozen=True, eq=False)
class CommitCert:
    """A committed block plus the precommits that committed it."""
    height: int
    round: int
    block: Block
    precommits: tuple
    sender: int

    kind = "commit_cert"

    def wire_size(self, committee_size: int = 0) -> int:
        return HEADER_BYTES + self.block.size() + sum(v.wire_size() for v in self.precommits)


def build_last_proof(height: int, round: int, block_hash: bytes, precommits, committee,
                     aggregate_sigs: bool = True, votes_root: bytes = b"", votes_ptr: bytes = b"",
                     backend="sim") -> LastProof:
    votes = sorted(precommits, key=lambda v: committee.index[v.sender])
    signers = tuple(v.sender for v in votes)
    if aggregate_sigs:
        agg = aggregate([v.signature for v in votes], [committee.pk_of(s) for s in signers], backend)
        return LastProof(height, round, block_hash, signers, aggregate=agg.sigma, votes_root=votes_root,
                         votes_ptr=votes_ptr)
    return LastProof(height, round, block_hash, signers, signatures=tuple(v.signature for v in votes),
                     votes_root=votes_root, votes_ptr=votes_ptr)


def last_proof_wire_size(lp: LastProof | None, committee_size: int) -> int:
    """Bytes of a LastProof at nominal signature size."""
    if lp is None:
        return 0
    sigs = SIG_BYTES if lp.aggregate is not None else SIG_BYTES * len(lp.signers)
    return 16 + 32 + (committee_size + 7) // 8 + sigs + len(lp.votes_root) + len(lp.votes_ptr)


def last_proof_verifications(lp: LastProof | None) -> int:
    """Signature checks needed to validate a LastProof."""
    if lp is None:
        return 0
    return 1 if lp.aggregate is not None else len(lp.signers)
