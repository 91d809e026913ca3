"""Block and transaction validity rules."""
from __future__ import annotations

from dataclasses import dataclass

from ..crypto import AggregateSignature, aggregation_weights, verify, verify_aggregate
from .codec import vote_bytes
from .store import ContentStore, NotFound
from .types import Block, LastProof, OffchainTx, ReportTx, tx_root

# Validation rules in the order they are checked.
RULES = ("version", "height", "prev_hash", "this_hash", "tx_root", "proposer", "proposer_signature",
         "transactions", "last_proof")


@dataclass(frozen=True)
class Verdict:
    ok: bool
    rule: str | None = None
    detail: str = ""

    def __bool__(self):
        return self.ok


VALID = Verdict(True)


def quorum(z: int) -> int:
    """Smallest vote count that is strictly more than two thirds of z."""
    return (2 * z) // 3 + 1


def check_tx(tx, store: ContentStore | None = None, report_fee: float | None = None,
             backend: str = "sim") -> str | None:
    """None if tx is valid, else a short reason."""
    if isinstance(tx, OffchainTx):
        msg = tx.signing_bytes()
        if not verify(tx.uav_sig, msg, tx.uav_pk, backend):
            return "uav signature"
        if tx.vehicle_pks and not verify_aggregate(tx.vehicle_aggregate(backend), msg, backend):
            return "vehicle multi-signature"
        if store is not None:
            for ptr in (tx.raw_ptr, tx.out_ptr):
                if ptr not in store:
                    return "dangling pointer"
            try:
                if tx.certificate != store.certificate(tx.raw_ptr):
                    return "store certificate"
            except NotFound:
                return "store certificate"
        return None
    if isinstance(tx, ReportTx):
        if not tx.informer_pks or not verify_aggregate(tx.informer_aggregate(backend), tx.signing_bytes(), backend):
            return "informer multi-signature"
        if report_fee is not None and abs(tx.fee - report_fee) > 1e-12:
            return "report fee"
        return None
    return "unknown transaction type"


def check_last_proof(lp: LastProof, parent_hash: bytes, parent_height: int, prev_committee,
                     backend: str = "sim") -> str | None:
    if lp.height != parent_height or lp.block_hash != parent_hash:
        return "LastProof refers to another block"
    signers = tuple(lp.signers)
    if len(set(signers)) != len(signers):
        return "duplicate signer"
    if any(s not in prev_committee.index for s in signers):
        return "signer outside committee"
    if len(signers) < quorum(prev_committee.size):
        return f"{len(signers)} precommits do not exceed 2/3 of {prev_committee.size}"
    msg = vote_bytes("precommit", lp.height, lp.round, lp.block_hash)
    pks = tuple(prev_committee.pk_of(s) for s in signers)
    if lp.aggregate is not None:
        agg = AggregateSignature(lp.aggregate, pks, aggregation_weights(pks, backend))
        if not verify_aggregate(agg, msg, backend):
            return "aggregate precommit signature"
    elif lp.signatures is not None and len(lp.signatures) == len(signers):
        for pk, sig in zip(pks, lp.signatures):
            if not verify(sig, msg, pk, backend):
                return "precommit signature"
    else:
        return "missing precommit signatures"
    return None


def validate_block(block: Block, parent_hash: bytes, parent_height: int, committee, prev_committee=None,
                   tx_check=None, backend: str = "sim") -> Verdict:
    """Check a block against the local chain tip and the committee.

    committee must offer leader_for(h, r), pk_of(id); prev_committee (the
    committee that committed the parent) is needed from height 2 on.
    Context-free checks are memoized on the block object.
    """
    h = block.header
    memo = block._memo
    if h.version != 1:
        return Verdict(False, "version", f"unknown version {h.version}")
    if h.height != parent_height + 1:
        return Verdict(False, "height", f"height {h.height} does not follow {parent_height}")
    if h.prev_hash != parent_hash:
        return Verdict(False, "prev_hash", "does not link to the local tip")
    if "hash_ok" not in memo:
        memo["hash_ok"] = h.compute_hash() == h.this_hash
        memo["root_ok"] = tx_root(block.txs) == h.tx_root
    if not memo["hash_ok"]:
        return Verdict(False, "this_hash", "header hash mismatch")
    if not memo["root_ok"]:
        return Verdict(False, "tx_root", "transaction root mismatch")
    try:
        expected = committee.leader_for(h.height, h.round)
    except Exception as exc:  # committee cannot answer, treat as illegitimate
        return Verdict(False, "proposer", str(exc))
    if h.proposer != expected:
        return Verdict(False, "proposer", f"proposer {h.proposer} is not leader {expected} of round {h.round}")
    key = ("psig", getattr(committee, "key", id(committee)))
    if key not in memo:
        memo[key] = verify(h.proposer_sig, h.this_hash, committee.pk_of(h.proposer), backend)
    if not memo[key]:
        return Verdict(False, "proposer_signature", "bad proposer signature")
    if tx_check is not None:
        if "txs_bad" not in memo:
            memo["txs_bad"] = [i for i, tx in enumerate(block.txs) if tx_check(tx) is not None]
        if memo["txs_bad"]:
            return Verdict(False, "transactions", f"invalid txs at {memo['txs_bad'][:5]}")
    if h.height == 1:
        if h.last_proof is not None:
            return Verdict(False, "last_proof", "first block carries no LastProof")
        return VALID
    if h.last_proof is None:
        return Verdict(False, "last_proof", "missing LastProof")
    if prev_committee is None:
        return Verdict(False, "last_proof", "no committee for parent height")
    key = ("lp", getattr(prev_committee, "key", id(prev_committee)), parent_hash)
    if key not in memo:
        memo[key] = check_last_proof(h.last_proof, parent_hash, parent_height, prev_committee, backend)
    if memo[key] is not None:
        return Verdict(False, "last_proof", memo[key])
    return VALID
