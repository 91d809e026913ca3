"""Discrete-event consensus simulation.

One Simulation owns the clock, the transport, every node, the committee
schedule, the mempool and the reputation ledger. Nodes only talk through
routed messages; the engine adds what a real deployment gets from the
outside world (elections on a shared schedule, block download for full
nodes outside the committee, report transactions built from the honest
validators' archives).
"""
from __future__ import annotations

import heapq
import json
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..consensus import (BlockPart, Commit, ConsensusNode, ConsensusParams, Evidence, NodeContext, Send, Timer,
                         elect_validators, static_committee)
from ..consensus.tally import InvariantViolation
from ..crypto import aggregate, keygen, sign
from ..ledger import ContentStore, OffchainTx, ReportTx, assemble_block, check_tx
from ..ledger.chunking import chunk_block
from ..reputation import HeightArchive, ReputationLedger, analyze_height, make_report, process_report, verify_evidence
from .adversary import ByzantineNode, Coalition, build_script
from .config import Scenario, load_scenario
from .transport import Transport

DELIVER, TIMER, CALL = 0, 1, 2


def rng_stream(master: int, name: str) -> np.random.Generator:
    """Independent generator per subsystem so one subsystem's draws never shift another's."""
    return np.random.default_rng(np.random.SeedSequence([int(master), zlib.crc32(name.encode())]))


@dataclass
class HeightRecord:
    height: int
    round: int
    commit_time: float
    created: float
    proposer: int
    n_txs: int
    block_bytes: int
    byzantine_leader: bool

    @property
    def latency(self) -> float:
        return self.commit_time - self.created


@dataclass
class RunMetrics:
    heights: list = field(default_factory=list)  # HeightRecord, append-only
    evidence: list = field(default_factory=list)  # (time, kind, accused, height, round, detail, byzantine)
    elections: list = field(default_factory=list)  # (height, time, members, level1)
    messages: int = 0
    bytes: int = 0
    verifications: int = 0
    reports_committed: int = 0
    false_accusations: int = 0
    late_post_gst: int = 0
    end_time: float = 0.0
    reputation: list = field(default_factory=list)  # (slot, node, raw, normalized)
    heals: list = field(default_factory=list)  # (time, {honest node: (height, round)}) when a partition ends

    def commit_rounds(self) -> list:
        return [h.round for h in self.heights]

    def mean_rounds(self, after_time: float = -math.inf) -> float:
        rs = [h.round + 1 for h in self.heights if h.commit_time >= after_time]
        return float(np.mean(rs)) if rs else float("nan")

    def throughput(self) -> float:
        if not self.heights:
            return 0.0
        span = self.heights[-1].commit_time - self.heights[0].created
        return sum(h.n_txs for h in self.heights) / span if span > 0 else 0.0

    def mean_latency(self) -> float:
        return float(np.mean([h.latency for h in self.heights])) if self.heights else float("nan")

    def messages_per_round(self) -> float:
        rounds = sum(h.round + 1 for h in self.heights)
        return self.messages / rounds if rounds else float("nan")

    def rounds_after_heal(self) -> list:
        """Per healed partition: rounds from the heal to the next commit, counting the round in progress."""
        out = []
        for t, state in self.heals:
            nxt = next((h for h in self.heights if h.commit_time >= t), None)
            if nxt is None:
                out.append(math.inf)
                continue
            at = [r for (hh, r) in state.values() if hh == nxt.height]
            # a quorum for an older round can complete during the round in progress, which counts as 1
            out.append(max(1, nxt.round - (max(at) if at else 0) + 1))
        return out

    def energy_per_block(self, e_tx: float, e_verify: float) -> float:
        if not self.heights:
            return float("nan")
        return (self.bytes * e_tx + self.verifications * e_verify) / len(self.heights)

    def summary(self) -> dict:
        return {
            "heights": len(self.heights),
            "mean_rounds": self.mean_rounds(),
            "throughput_tps": self.throughput(),
            "mean_latency": self.mean_latency(),
            "messages": self.messages,
            "bytes": self.bytes,
            "verifications": self.verifications,
            "messages_per_round": self.messages_per_round(),
            "evidence": len(self.evidence),
            "reports_committed": self.reports_committed,
            "false_accusations": self.false_accusations,
            "late_post_gst": self.late_post_gst,
            "end_time": self.end_time,
        }


class SafetyViolation(InvariantViolation):
    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class _Ctx(NodeContext):
    def __init__(self, sim: "Simulation"):
        self.sim = sim

    def committee(self, height):
        return self.sim.committee_for(height)

    def make_block(self, node, height, round, last_proof, now):
        return self.sim.make_block(node, height, round, last_proof, now)

    def chunk(self, block, chunk_size):
        return self.sim.chunk(block, chunk_size)

    def reassemble(self, chunks, root):
        return self.sim.reassemble(chunks, root)

    @property
    def tx_check(self):
        return self.sim.tx_check

    def store_votes(self, data):
        return self.sim.store.put(data, shard="votes")


class Simulation:
    def __init__(self, scenario: Scenario | dict | None = None, **kw):
        if not isinstance(scenario, Scenario):
            scenario = load_scenario(scenario, **kw)
        self.scenario = sc = scenario
        net, con, rep = sc.network, sc.consensus, sc.reputation
        self.seed = sc.seed
        self.n_full = net["full_nodes"]
        self.script = build_script(sc.adversary, self.n_full, rng_stream(self.seed, "adversary"))
        self.transport = Transport(net["delta"], net["delta_min"], net["gst"], net["pre_gst_factor"],
                                   net["drop_prob"], net["bandwidth"],
                                   [self.script.partition] if self.script.partition else [],
                                   seed=int(rng_stream(self.seed, "transport").integers(2 ** 31)))
        self.params = ConsensusParams(con["propose_timeout"], con["timeout_increment"], con["prevote_timeout"],
                                      con["precommit_timeout"], con["commit_wait"], con["sync_delay"],
                                      con["chunk_size"], con["aggregate_last_commit"], con["record_last_votes"],
                                      con["backend"])
        self.backend = con["backend"]
        self.verify_time = net["verify_time"]
        self.slot_len = net["slot"]
        self.keys = {i: keygen(("node", self.seed, i), owner=i, backend=self.backend) for i in range(self.n_full)}
        self.pks = {i: k.pk for i, k in self.keys.items()}
        self.byz = self.script.ids
        self.honest = [i for i in range(self.n_full) if i not in self.byz]
        self.ctx = _Ctx(self)
        coalition = Coalition(self.script, rng_stream(self.seed, "adversary-acts"))
        self.nodes = {}
        for i in range(self.n_full):
            if i in self.byz:
                self.nodes[i] = ByzantineNode(i, self.keys[i], self.ctx, self.params, self.script.byzantine[i],
                                              coalition)
            else:
                self.nodes[i] = ConsensusNode(i, self.keys[i], self.ctx, self.params)
        self.use_reputation = sc.scheme != "naive"
        self.ledger = ReputationLedger(range(self.n_full), rep["initial"], rep["eta"],
                                       {k: float(v) for k, v in rep["deltas"].items()})
        self.forensics = rep["forensics"] and self.use_reputation
        self.store = ContentStore()
        self.metrics = RunMetrics()
        self.epochs: dict = {}
        self.election_every = con["election_every"]
        self._elect(0, 0.0)
        self.chain: dict = {}  # height -> (block, round, precommits, time)
        self.registry: dict = {}  # height -> set of block hashes committed by honest nodes
        self.trace_on = bool(con["trace"])
        self.trace: list = []
        self._heap: list = []
        self._seq = 0
        self._busy = [0.0] * self.n_full
        self._link_free = [0.0] * self.n_full
        self._chunk_cache: dict = {}
        self._block_by_root: dict = {}
        self._tx_ok: set = set()
        self._pool: list | None = None
        self._pool_pos = 0
        self.reports: dict = {}  # digest -> (ReportTx, Misbehavior), pending inclusion
        self._committed_reports: set = set()
        self._seen_evidence: set = set()
        self.target = con["heights"]
        self.max_time = con["max_time"]
        self.now = 0.0
        self._done = False

    # ---- committees -----------------------------------------------------------

    def committee_for(self, height: int):
        return self.epochs[(height - 1) // self.election_every]

    def _elect(self, epoch: int, now: float):
        if not self.use_reputation:
            c = static_committee(range(self.n_full), pks=self.pks)
        else:
            con = self.scenario.consensus
            self.ledger.advance_to(self._slot(now) - 1)
            norm = self.ledger.normalized()
            c = elect_validators(range(self.n_full), norm, con["z"], con["psi"], ballots=self.script.ballots(),
                                 raw_reputation=self.ledger.raw, pks=self.pks)
        self.epochs[epoch] = c
        self.metrics.elections.append((epoch * self.election_every + 1, now, c.members, c.level1))
        return c

    def _slot(self, t: float) -> int:
        return int(math.floor(t / self.slot_len)) + 1

    # ---- blocks and transactions ---------------------------------------------------

    def _tx_pool(self):
        con = self.scenario.consensus
        n = max(con["tx_pool"], con["block_txs"])
        if self._pool is None:
            uav = keygen(("uav", self.seed), owner="uav", backend=self.backend)
            veh = keygen(("vehicle", self.seed), owner="vehicle", backend=self.backend)
            rng = rng_stream(self.seed, "mempool")
            pool = []
            for k in range(n):
                raw = rng.bytes(64)
                raw_ptr = self.store.put(raw, shard="raw")
                out_ptr = self.store.put(raw[:32], shard="out")
                tx = OffchainTx(uav.pk, (veh.pk,), raw_ptr, out_ptr, f"task-{k}", float(k))
                msg = tx.signing_bytes()
                vs = aggregate([sign(msg, veh.sk, self.backend)], [veh.pk], self.backend).sigma
                tx = OffchainTx(uav.pk, (veh.pk,), raw_ptr, out_ptr, tx.description, tx.timestamp,
                                sign(msg, uav.sk, self.backend), vs, self.store.certificate(raw_ptr))
                pool.append(tx)
            self._pool = pool
        return self._pool

    def tx_check(self, tx):
        d = tx.digest
        if d in self._tx_ok:
            return None
        why = check_tx(tx, self.store, self.scenario.reputation["report_fee"], self.backend)
        if why is None:
            self._tx_ok.add(d)
        return why

    def make_block(self, node, height, round, last_proof, now):
        txs = []
        rep_cap = self.scenario.reputation["max_reports_per_block"]
        for d, (tx, ev) in list(self.reports.items())[:rep_cap]:
            try:
                c = self.committee_for(ev.height)
            except KeyError:
                continue
            if verify_evidence(ev, c, self.backend):
                txs.append(tx)
        n = self.scenario.consensus["block_txs"]
        if n:
            pool = self._tx_pool()
            for _ in range(n):
                txs.append(pool[self._pool_pos % len(pool)])
                self._pool_pos += 1
        return assemble_block(txs, node.tip_hash, height, node.id, node.keys.sk, last_proof, round=round,
                              timestamp=now, backend=self.backend)

    def chunk(self, block, size):
        got = self._chunk_cache.get(block.hash)
        if got is None:
            got = chunk_block(block, size)
            self._chunk_cache[block.hash] = got
            self._block_by_root[got[1]] = block
        return got

    def reassemble(self, chunks, root):
        # every chunk was checked against root by the node, so the block is the one chunked under that root
        block = self._block_by_root.get(root)
        if block is None:
            from ..ledger.chunking import reassemble
            return reassemble(chunks, root)
        return block

    # ---- event plumbing ---------------------------------------------------------------

    def _push(self, t, kind, a, b=None, c=None):
        self._seq += 1
        heapq.heappush(self._heap, (t, self._seq, kind, a, b, c))

    def _log(self, **ev):
        if self.trace_on:
            self.trace.append(ev)

    def _route(self, src: int, send: Send, t: float):
        msg = send.msg
        if send.to is None:
            try:
                dsts = self.committee_for(msg.height).members
            except KeyError:
                return
        else:
            dsts = send.to
        size = msg.wire_size(len(dsts))
        tr = self.transport
        tx = size * 8.0 / tr.bandwidth
        stream = "chunk" if isinstance(msg, BlockPart) else "main"
        m = self.metrics
        free = self._link_free
        for d in dsts:
            if d == src:
                continue
            start = free[src] if free[src] > t else t
            free[src] = start + tx
            m.messages += 1
            m.bytes += size
            heal = tr.heal_time(src, d, t) if tr.partitions else None
            if heal is not None:
                arr = max(tr.redeliver(heal), start + tx)
                held = True
            else:
                arr = start + tx + tr.delay(t, stream)
                held = False
            self._seq += 1
            heapq.heappush(self._heap, (arr, self._seq, DELIVER, d, msg, (src, start, size, held)))

    def _handle(self, nid: int, outs, t: float):
        for o in outs:
            if isinstance(o, Send):
                self._route(nid, o, t)
            elif isinstance(o, Timer):
                self._push(t + o.delay, TIMER, nid, o)
            elif isinstance(o, Commit):
                self._on_commit(nid, o, t)
            elif isinstance(o, Evidence):
                self._log(t=t, node=nid, event="evidence", kind=o.kind, accused=o.accused, height=o.height)

    def _run_node(self, nid: int, t: float, fn, *args):
        node = self.nodes[nid]
        before = node.verifications
        outs = fn(*args, t)
        spent = node.verifications - before
        self.metrics.verifications += spent
        done = t
        if spent and self.verify_time:
            done = t + spent * self.verify_time
            self._busy[nid] = done
        self._handle(nid, outs, done)

    # ---- commits ----------------------------------------------------------------------

    def _on_commit(self, nid: int, c: Commit, t: float):
        h = c.height
        if nid not in self.byz:
            reg = self.registry.setdefault(h, set())
            reg.add(c.block.hash)
            if len(reg) > 1:
                raise SafetyViolation(f"two blocks committed at height {h} (seed {self.seed})", self.trace[-200:])
        if h in self.chain:
            return
        self.chain[h] = (c.block, c.round, c.precommits, t)
        block = c.block
        committee = self.committee_for(h)
        self.metrics.heights.append(HeightRecord(h, c.round, t, block.header.timestamp, block.header.proposer,
                                                 len(block.txs), block.size(), block.header.proposer in self.byz))
        self._log(t=t, node=nid, event="commit", height=h, round=c.round, block=block.hash.hex()[:16])
        if self.use_reputation:
            self._reward(block, t)
            self._apply_reports(block, t)
        if h % self.election_every == 0:
            self._elect(h // self.election_every, t)
        nxt = self.committee_for(h + 1)
        for i, node in self.nodes.items():
            if i not in committee and node.tip_height < h:
                self._catch_up(i, h, t)
        # members that leave the committee and lag behind still get the chain eventually
        for m in committee.members:
            if m not in nxt:
                self._push(t + 10 * self.transport.delta, CALL, "catch_up", m, h)
        if self.forensics:
            self._push(t + self.scenario.reputation["forensic_delay"], CALL, "forensics", h)
        if len(self.chain) >= self.target:
            self._done = True

    def _catch_up(self, nid: int, upto: int, t: float):
        node = self.nodes[nid]
        while node.tip_height < upto and node.tip_height + 1 in self.chain:
            b, r, pcs, _ = self.chain[node.tip_height + 1]
            self._run_node(nid, t, node.sync_commit, node.tip_height + 1, b, r, pcs)

    def _reward(self, block, t):
        """sbc for the parent's proposer and sbv for each parent precommit signer, read off the LastProof."""
        lp = block.header.last_proof
        if lp is None or lp.height not in self.chain:
            return
        slot = self._slot(t)
        parent = self.chain[lp.height][0]
        self.ledger.record(parent.header.proposer, slot, "sbc", evidence=parent.hash)
        for s in lp.signers:
            self.ledger.record(s, slot, "sbv", evidence=parent.hash)

    def _apply_reports(self, block, t):
        rep = self.scenario.reputation
        slot = self._slot(t)
        for tx in block.txs:
            if not isinstance(tx, ReportTx):
                continue
            d = tx.digest
            if d in self._committed_reports:
                continue
            self._committed_reports.add(d)
            _, ev = self.reports.pop(d, (None, None))
            ok = ev is not None and verify_evidence(ev, self.committee_for(ev.height), self.backend)
            out = process_report(tx, ok, rep["deltas"]["rep-informer"], rep["deltas"]["rep-accused"], self.backend)
            self.metrics.reports_committed += 1
            if not out.accepted:
                continue
            for node, delta in out.deltas.items():
                kind = "rep-accused" if node == tx.accused else "rep-informer"
                self.ledger.record(node, slot, kind, abs(delta), evidence=d)
            self.ledger.record(ev.accused, slot, ev.kind, evidence=d)

    def _forensics(self, h: int, t: float):
        committee = self.committee_for(h)
        arch = HeightArchive(h)
        for m in committee.members:
            if m not in self.byz:
                arch.merge(self.nodes[m].archive, m)
        rep = self.scenario.reputation
        for ev in analyze_height(arch, committee, rep["min_timeouts"]):
            if ev.key in self._seen_evidence:
                continue
            self._seen_evidence.add(ev.key)
            byz = ev.accused in self.byz
            self.metrics.evidence.append((t, ev.kind, ev.accused, ev.height, ev.round, ev.detail, byz))
            if not byz:
                self.metrics.false_accusations += 1
            self._log(t=t, event="report", kind=ev.kind, accused=ev.accused, height=h, round=ev.round)
            informers = [m for m in committee.members if m not in self.byz and m != ev.accused][:rep["informers"]]
            if not informers:
                continue
            tx = make_report(ev, committee.pk_of(ev.accused), [self.keys[i] for i in informers], rep["report_fee"],
                             t, self.backend)
            self.reports[tx.digest] = (tx, ev)
        for node in self.nodes.values():
            node.archive.prune(h + 1)

    # ---- main loop ------------------------------------------------------------------------

    def run(self) -> RunMetrics:
        for i, node in self.nodes.items():
            self._handle(i, node.start(0.0), 0.0)
        for p in self.transport.partitions:
            self._push(p.end, CALL, "heal", None)
        heap = self._heap
        busy = self._busy
        tr = self.transport
        pop = heapq.heappop
        while heap and not self._done:
            t, seq, kind, a, b, c = pop(heap)
            if t > self.max_time:
                break
            self.now = t
            if kind == DELIVER:
                if busy[a] > t:
                    heapq.heappush(heap, (busy[a], seq, kind, a, b, c))
                    continue
                src, start, size, held = c
                if tr.partitions:
                    heal = tr.heal_time(src, a, t)
                    if heal is not None:
                        self._push(tr.redeliver(heal), DELIVER, a, b, (src, start, size, True))
                        continue
                tr.note_delivery(src, a, start, t, size, held)
                self._run_node(a, t, self.nodes[a].deliver, b)
            elif kind == TIMER:
                if busy[a] > t:
                    heapq.heappush(heap, (busy[a], seq, kind, a, b, c))
                    continue
                self._run_node(a, t, self.nodes[a].timeout, b.kind, b.height, b.round)
            else:
                if a == "forensics":
                    self._forensics(b, t)
                elif a == "catch_up":
                    self._catch_up(b, c, t)
                elif a == "heal":
                    self.metrics.heals.append((t, {i: (self.nodes[i].height, self.nodes[i].round)
                                                   for i in self.honest}))
        m = self.metrics
        m.end_time = self.now
        m.late_post_gst = tr.stats.late_post_gst
        if self.use_reputation:
            self.ledger.advance_to(self._slot(self.now))
            m.reputation = self.ledger.csv_rows()
        return m

    def write_trace(self, path):
        with open(path, "w") as fh:
            for ev in self.trace:
                fh.write(json.dumps(ev, sort_keys=True, default=str) + "\n")


def run_scenario(config=None, overrides=None, seed=None) -> tuple[RunMetrics, Simulation]:
    sim = Simulation(load_scenario(config, overrides, seed))
    return sim.run(), sim
