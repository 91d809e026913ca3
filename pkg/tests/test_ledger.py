import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rescuesim.consensus import build_last_proof, make_vote, static_committee
from rescuesim.crypto import aggregate, h0, keygen, sign
from rescuesim.ledger import (GENESIS_HASH, NIL, ChunkRejected, CodecError, ContentStore, InvalidTransaction,
                              NotFound, OffchainTx, ReportTx, assemble_block, check_chunk, check_tx, chunk_block,
                              chunk_bytes, decode, decode_block, decode_tx, encode, quorum, reassemble, tx_root,
                              validate_block)
from rescuesim.ledger.codec import unversioned, versioned

KEYS = {i: keygen(1234, owner=i) for i in range(4)}
COMMITTEE = static_committee(range(4), psi=4, pks={i: k.pk for i, k in KEYS.items()})


def _offchain(store, n=0, signed=True):
    uav = keygen(b"uav")
    vehs = [keygen(b"veh", index=i) for i in range(2)]
    raw = store.put(f"raw-{n}".encode(), shard=1)
    out = store.put(f"out-{n}".encode(), shard=1)
    tx = OffchainTx(uav.pk, tuple(v.pk for v in vehs), raw, out, "flood map", float(n))
    if not signed:
        return tx
    msg = tx.signing_bytes()
    agg = aggregate([sign(msg, v.sk) for v in vehs], [v.pk for v in vehs])
    return OffchainTx(uav.pk, tx.vehicle_pks, raw, out, "flood map", float(n), sign(msg, uav.sk), agg.sigma,
                      store.certificate(raw))


def _leader_block(height, parent, last_proof=None, txs=(), round=0, **kw):
    leader = COMMITTEE.leader_for(height, round)
    return assemble_block(txs, parent, height, leader, KEYS[leader].sk, last_proof, round=round, **kw)


def _proof_for(block, signers=range(4), aggregate_sigs=True):
    pcs = [make_vote("precommit", block.height, block.header.round, block.hash, s, KEYS[s].sk) for s in signers]
    return build_last_proof(block.height, block.header.round, block.hash, pcs, COMMITTEE, aggregate_sigs)


# ---- codec ----------------------------------------------------------------------------


values = st.recursive(
    st.none() | st.booleans() | st.integers(-2 ** 80, 2 ** 80) | st.floats(allow_nan=False)
    | st.binary(max_size=20) | st.text(max_size=10),
    lambda inner: st.lists(inner, max_size=4).map(tuple), max_leaves=12)


@settings(max_examples=150, deadline=None)
@given(st.lists(values, max_size=5))
def test_codec_roundtrip(fields):
    back = decode(encode(*fields))
    norm = tuple(int(v) if isinstance(v, bool) else v for v in fields)
    assert back == norm


def test_codec_is_canonical_and_rejects_garbage():
    assert encode(1, b"x") == encode(1, b"x")
    assert encode(1) != encode(1.0)
    with pytest.raises(CodecError):
        decode(b"z\x00\x00\x00\x00")
    with pytest.raises(CodecError):
        decode(b"b\x00\x00\x00\x09abc")
    with pytest.raises(CodecError):
        encode(object())
    with pytest.raises(CodecError):
        unversioned(b"\x02" + encode("x"))
    assert unversioned(versioned("k", 1)) == ("k", 1)


# ---- content store ----------------------------------------------------------------------


def test_store_put_get(tmp_path):
    s = ContentStore()
    p = s.put(b"data", shard=3)
    assert p == h0(b"data") and s.get(p) == b"data" and p in s
    assert s.put(b"data", shard=4) == p and len(s) == 1
    assert s.shards[p] == {3, 4}
    with pytest.raises(NotFound):
        s.get(h0(b"other"))
    with pytest.raises(NotFound):
        s.certificate(h0(b"other"))
    disk = ContentStore(tmp_path / "cas")
    q = disk.put(b"persisted")
    again = ContentStore(tmp_path / "cas")
    assert again.get(q) == b"persisted" and len(again) == 1


# ---- transactions -----------------------------------------------------------------------


def test_offchain_tx_checks():
    store = ContentStore()
    tx = _offchain(store)
    assert check_tx(tx, store) is None
    assert decode_tx(tx.encode()) == tx
    assert check_tx(_offchain(store, signed=False)) == "uav signature"
    forged = OffchainTx(tx.uav_pk, tx.vehicle_pks, tx.raw_ptr, tx.out_ptr, "altered", tx.timestamp,
                        tx.uav_sig, tx.vehicle_sig, tx.certificate)
    assert check_tx(forged) == "uav signature"
    assert check_tx(tx, ContentStore()) == "dangling pointer"
    assert check_tx("junk") == "unknown transaction type"


def test_report_tx_fee_and_signature():
    informers = [keygen(b"inf", index=i) for i in range(3)]
    base = ReportTx(5, KEYS[0].pk, (1, 2, 3), tuple(k.pk for k in informers), b"evidence", 1.0, 9.0)
    msg = base.signing_bytes()
    agg = aggregate([sign(msg, k.sk) for k in informers], [k.pk for k in informers])
    tx = ReportTx(*base.fields()[:-1], agg.sigma)
    assert check_tx(tx, report_fee=1.0) is None
    assert check_tx(tx, report_fee=2.0) == "report fee"
    assert check_tx(base) == "informer multi-signature"
    assert decode_tx(tx.encode()) == tx


# ---- blocks -------------------------------------------------------------------------------


def test_block_roundtrip_and_hash():
    store = ContentStore()
    b = _leader_block(1, GENESIS_HASH, txs=[_offchain(store, i) for i in range(3)])
    back = decode_block(b.encode())
    assert back.hash == b.hash == b.header.compute_hash()
    assert back.txs == b.txs
    assert b.header.tx_root == tx_root(b.txs)
    assert tx_root(()) != tx_root(b.txs)


def test_assemble_reports_every_offender():
    store = ContentStore()
    txs = [_offchain(store, 0), _offchain(store, 1, signed=False), _offchain(store, 2),
           _offchain(store, 3, signed=False)]
    with pytest.raises(InvalidTransaction) as e:
        _leader_block(1, GENESIS_HASH, txs=txs, tx_check=check_tx)
    assert e.value.offenders == [1, 3]


def test_quorum():
    assert [quorum(z) for z in (1, 3, 4, 6, 7, 10, 100)] == [1, 3, 3, 5, 5, 7, 67]
    for z in range(1, 200):
        q = quorum(z)
        assert 3 * q > 2 * z and 3 * (q - 1) <= 2 * z


def test_validate_chain_of_two():
    b1 = _leader_block(1, GENESIS_HASH)
    assert validate_block(b1, GENESIS_HASH, 0, COMMITTEE)
    b2 = _leader_block(2, b1.hash, _proof_for(b1))
    assert validate_block(b2, b1.hash, 1, COMMITTEE, COMMITTEE)
    plain = _leader_block(2, b1.hash, _proof_for(b1, aggregate_sigs=False))
    assert validate_block(plain, b1.hash, 1, COMMITTEE, COMMITTEE)


@pytest.mark.parametrize("case,rule", [
    ("height", "height"), ("parent", "prev_hash"), ("proposer", "proposer"), ("sig", "proposer_signature"),
    ("few", "last_proof"), ("missing_lp", "last_proof"), ("hash", "this_hash"), ("root", "tx_root"),
])
def test_validate_block_rejections(case, rule):
    b1 = _leader_block(1, GENESIS_HASH)
    good_lp = _proof_for(b1)
    parent, ph = b1.hash, 1
    if case == "height":
        b = _leader_block(3, parent, good_lp)
    elif case == "parent":
        b = _leader_block(2, h0(b"elsewhere"), good_lp)
    elif case == "proposer":
        wrong = (COMMITTEE.leader_for(2, 0) + 1) % 4
        b = assemble_block((), parent, 2, wrong, KEYS[wrong].sk, good_lp)
    elif case == "sig":
        leader = COMMITTEE.leader_for(2, 0)
        b = assemble_block((), parent, 2, leader, KEYS[(leader + 1) % 4].sk, good_lp)
    elif case == "few":
        b = _leader_block(2, parent, _proof_for(b1, signers=range(2)))
    elif case == "missing_lp":
        b = _leader_block(2, parent, None)
    elif case == "hash":
        b0 = _leader_block(2, parent, good_lp)
        h = b0.header
        b = type(b0)(type(h)(h.height, h.round, h.prev_hash, h.tx_root, h.proposer, 99.0, h.last_proof,
                             h.this_hash, h.proposer_sig))
    else:
        store = ContentStore()
        b0 = _leader_block(2, parent, good_lp)
        b = type(b0)(b0.header, (_offchain(store),))
    v = validate_block(b, parent, ph, COMMITTEE, COMMITTEE)
    assert not v and v.rule == rule


def test_last_proof_for_other_block_rejected():
    b1 = _leader_block(1, GENESIS_HASH)
    other = _leader_block(1, GENESIS_HASH, timestamp=5.0)
    b2 = _leader_block(2, b1.hash, _proof_for(other))
    v = validate_block(b2, b1.hash, 1, COMMITTEE, COMMITTEE)
    assert v.rule == "last_proof"


def test_first_block_must_not_carry_proof():
    b1 = _leader_block(1, GENESIS_HASH)
    bad = _leader_block(1, GENESIS_HASH, _proof_for(b1))
    assert validate_block(bad, GENESIS_HASH, 0, COMMITTEE).rule == "last_proof"


# ---- chunking ------------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(st.binary(max_size=300), st.integers(1, 64))
def test_chunk_bytes_cover_data(data, size):
    chunks, root = chunk_bytes(data, size)
    assert b"".join(c.data for c in chunks) == data
    assert all(check_chunk(c, root) for c in chunks)
    assert all(len(c.data) <= size for c in chunks)


def test_reassemble_block_and_reject_tampered():
    store = ContentStore()
    b = _leader_block(1, GENESIS_HASH, txs=[_offchain(store, i) for i in range(4)])
    chunks, root = chunk_block(b, 128)
    assert len(chunks) > 3
    assert reassemble(reversed(chunks), root).hash == b.hash
    bad = list(chunks)
    c = bad[2]
    bad[2] = type(c)(c.index, c.total, bytes([c.data[0] ^ 1]) + c.data[1:], c.proof)
    with pytest.raises(ChunkRejected) as e:
        reassemble(bad, root)
    assert e.value.bad_ids == [2]
    with pytest.raises(ValueError):
        reassemble(chunks[:-1], root)
    with pytest.raises(ValueError):
        chunk_bytes(b"x", 0)


def test_nil_is_not_a_block_hash():
    assert NIL != _leader_block(1, GENESIS_HASH).hash
