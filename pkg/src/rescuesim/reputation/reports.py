"""Report transactions: building, evidence checks and their reputation effect."""
from __future__ import annotations

from dataclasses import dataclass, field

from ..crypto import aggregate, sign, verify, verify_aggregate
from ..ledger import ReportTx
from .detect import Misbehavior


class InvalidReport(ValueError):
    pass


def make_report(evidence: Misbehavior, accused_pk: bytes, informer_keys, fee: float, timestamp: float,
                backend: str = "sim") -> ReportTx:
    """Report tx multi-signed by every informer key (KeyPair with owner = node id)."""
    informer_keys = list(informer_keys)
    unsigned = ReportTx(evidence.accused, accused_pk, tuple(k.owner for k in informer_keys),
                        tuple(k.pk for k in informer_keys), evidence.encode(), float(fee), float(timestamp))
    msg = unsigned.signing_bytes()
    agg = aggregate([sign(msg, k.sk, backend) for k in informer_keys], [k.pk for k in informer_keys], backend)
    return ReportTx(unsigned.accused, accused_pk, unsigned.informers, unsigned.informer_pks, unsigned.evidence,
                    unsigned.fee, unsigned.timestamp, agg.sigma)


def verify_evidence(ev: Misbehavior, committee, backend: str = "sim") -> bool:
    """Check that the evidence's signed messages really show the fault."""
    try:
        pk = committee.pk_of(ev.accused)
    except KeyError:
        return False
    if ev.kind == "cp":
        if len(ev.items) != 2:
            return False
        a, b = ev.items
        return (a.sender == b.sender == ev.accused == committee.leader_for(a.height, a.round)
                and (a.height, a.round) == (b.height, b.round) and a.block_hash != b.block_hash
                and all(verify(p.signature, p.signing_bytes(), pk, backend) for p in (a, b)))
    if ev.kind == "cv":
        if len(ev.items) != 2:
            return False
        a, b = ev.items
        return (a.sender == b.sender == ev.accused and (a.kind, a.height, a.round) == (b.kind, b.height, b.round)
                and a.value != b.value
                and all(verify(v.signature, v.signing_bytes(), pk, backend) for v in (a, b)))
    if ev.kind == "wbc":
        if len(ev.items) != 1:
            return False
        p = ev.items[0]
        return (p.sender == ev.accused == committee.leader_for(p.height, p.round)
                and verify(p.signature, p.signing_bytes(), pk, backend))
    if ev.kind == "nbc":
        return ev.accused == committee.leader_for(ev.height, ev.round)
    if ev.kind == "vol":
        if not ev.items:
            return False
        ok = all(v.sender == ev.accused and verify(v.signature, v.signing_bytes(), pk, backend) for v in ev.items)
        if ev.detail == "locking" and len(ev.items) == 2:
            lock, pv = ev.items
            ok = ok and lock.round < pv.round and lock.value != pv.value
        return ok
    return False


@dataclass
class ReportOutcome:
    accepted: bool
    deltas: dict = field(default_factory=dict)  # node -> reputation change
    fee_shares: dict = field(default_factory=dict)  # node -> fee received
    fee_forfeited: float = 0.0


def process_report(tx: ReportTx, evidence_ok: bool, delta_rep: float = 1.5, delta_acc: float = 2.5,
                   backend: str = "sim") -> ReportOutcome:
    """Reputation effect of one report.

    Valid evidence: every informer gains delta_rep, the accused loses
    delta_acc and the fee is split among the informers. Bogus evidence:
    the fee is lost and nothing else changes.
    """
    if not tx.informer_pks or not verify_aggregate(tx.informer_aggregate(backend), tx.signing_bytes(), backend):
        raise InvalidReport("informer multi-signature does not verify")
    if not evidence_ok:
        return ReportOutcome(False, {}, {}, tx.fee)
    deltas: dict = {}
    for i in tx.informers:
        deltas[i] = deltas.get(i, 0.0) + delta_rep
    deltas[tx.accused] = deltas.get(tx.accused, 0.0) - delta_acc
    share = tx.fee / len(tx.informers)
    return ReportOutcome(True, deltas, {i: share for i in tx.informers}, 0.0)
