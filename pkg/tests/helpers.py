"""Shared test utilities: real mined blocks at low difficulty, hand-built
event logs for the metrics engine, and a hand-wired simulation harness."""

from __future__ import annotations

import random
from pathlib import Path

from blockbox import wire
from blockbox.chain import Block, GenesisConfig, genesis_block, make_block, pow_valid
from blockbox.events import HeadChanged, Mined, NodeEvent, Received
from blockbox.node import Node, NodeConfig
from blockbox.simnet import GeometricMiner, Scheduler, SimRuntime, SimTransport, derive_seed

GOLDEN = Path(__file__).parent / "golden"

GENESIS_CONFIG = GenesisConfig(chain_id=1, difficulty=1, extra=b"fixtures")
GENESIS = genesis_block(GENESIS_CONFIG)

_rng = random.Random(0xB10C)


def mine_block(
    parent: Block,
    miner: str,
    difficulty: int = 1,
    timestamp_ms: int = 0,
    rng: random.Random | None = None,
) -> Block:
    """Brute-force a genuinely valid block on top of parent."""
    r = rng or _rng
    while True:
        blk = make_block(
            parent.number + 1, parent.hash, miner, r.getrandbits(64), difficulty, timestamp_ms
        )
        if pow_valid(blk):
            return blk


def chain_of(parent: Block, miners: list[str], difficulty: int = 1, t0: int = 0) -> list[Block]:
    out = []
    cur = parent
    for i, miner in enumerate(miners):
        cur = mine_block(cur, miner, difficulty, timestamp_ms=t0 + i)
        out.append(cur)
    return out


class LogBuilder:
    """Accumulates per-node events with monotonically growing timestamps."""

    def __init__(self, node_ids: list[str]):
        self.logs: dict[str, list[NodeEvent]] = {n: [] for n in node_ids}
        self.t = 0
        self._heads: dict[str, Block] = {n: GENESIS for n in node_ids}
        self._td: dict[bytes, int] = {GENESIS.hash: 0}

    def _tick(self) -> int:
        self.t += 1
        return self.t

    def _track(self, block: Block) -> int | None:
        parent_td = self._td.get(block.parent_hash)
        if parent_td is None:
            return None  # detached ancestry; cannot become a head here
        self._td.setdefault(block.hash, parent_td + block.difficulty)
        return self._td[block.hash]

    def mined(self, node: str, block: Block, head: bool | None = None) -> "LogBuilder":
        t = self._tick()
        self.logs[node].append(Mined(t, node, block))
        td = self._track(block)
        if head is None:
            head = td is not None and td > self._td[self._heads[node].hash]
        if head:
            self._set_head(node, block, t)
        return self

    def received(self, node: str, block: Block, from_peer: str, head: bool | None = None) -> "LogBuilder":
        t = self._tick()
        self.logs[node].append(Received(t, node, block, from_peer))
        td = self._track(block)
        if head is None:
            head = td is not None and td > self._td[self._heads[node].hash]
        if head:
            self._set_head(node, block, t)
        return self

    def _set_head(self, node: str, block: Block, t: int) -> None:
        old = self._heads[node]
        self._heads[node] = block
        self.logs[node].append(
            HeadChanged(t, node, old.hash, block.hash, block.number, 0)
        )

    def seen_by_all(self, block: Block, miner: str, head: bool | None = None) -> "LogBuilder":
        self.mined(miner, block, head)
        for node in self.logs:
            if node != miner:
                self.received(node, block, from_peer=miner, head=head)
        return self


class MiniNet:
    """Hand-wired Scheduler + SimTransport harness for node-level tests."""

    def __init__(self, latency=wire.LatencyModel()):
        self.sched = Scheduler()
        self.transport = SimTransport(self.sched, latency)
        self.logs = {}
        self.nodes = {}
        self.miners = {}
        self.control_replies = []

    def add_node(self, node_id, genesis, peers=(), rate=1000.0, seed=0):
        cfg = NodeConfig(node_id, genesis, tuple(peers), rate)
        node = Node(cfg, SimRuntime(self, node_id))
        self.logs[node_id] = []
        self.nodes[node_id] = node
        self.miners[node_id] = GeometricMiner(
            self.sched, random.Random(derive_seed(seed, "mine", node_id)), rate, node.on_block_found
        )
        self.transport.register(node_id, node)
        return node

    def add_endpoint(self, node_id, endpoint):
        self.logs[node_id] = []
        self.transport.register(node_id, endpoint)
        return endpoint

    def start(self, *edges):
        for node in self.nodes.values():
            node.start()
        for a, b in edges:
            self.transport.connect(a, b)

    def drain(self, max_events=100_000):
        for _ in range(max_events):
            if not self.sched.run_one():
                return
        raise AssertionError("simulation did not quiesce")

    def run_until(self, pred, max_events=100_000):
        for _ in range(max_events):
            if pred():
                return
            if not self.sched.run_one():
                raise AssertionError("queue drained before condition")
        raise AssertionError("condition never reached")


class ScriptedSyncPeer:
    """Serves handshakes and GetBlocks from a scripted chain; can swap to
    a second chain after the first request to fake a mid-sync reorg."""

    def __init__(self, net: MiniNet, node_id: str, genesis_cfg: GenesisConfig,
                 chain, reorg_to=None):
        self.net = net
        self.node_id = node_id
        self.genesis = genesis_block(genesis_cfg)
        self.chain_id = genesis_cfg.chain_id
        self.chain = chain
        self.reorg_to = reorg_to
        self.requests = 0

    def _send(self, peer, msg):
        self.net.transport.send(self.node_id, peer, msg)

    def on_peer_link(self, peer):
        tip = self.chain[-1]
        self._send(peer, wire.Status(
            node_id=self.node_id, chain_id=self.chain_id,
            genesis_hash=self.genesis.hash, head_hash=tip.hash,
            head_number=tip.number,
            total_difficulty=self.genesis.difficulty + sum(b.difficulty for b in self.chain),
        ))

    def on_peer_disconnected(self, peer):
        pass

    def on_message(self, peer, msg):
        if isinstance(msg, wire.GetBlocks):
            self.requests += 1
            if self.reorg_to is not None and self.requests > 1:
                self.chain = self.reorg_to  # the scripted reorg
            lo = msg.from_number - 1
            batch = tuple(self.chain[lo : lo + msg.count]) if lo >= 0 else ()
            self._send(peer, wire.Blocks(batch))
