"""Per-node state machine: mining, gossip, initial sync, commands.

The Node class is transport-agnostic. A runtime object supplies the
clock, message delivery, the mining engine and event-log output; the
discrete-event simulator and the TCP runner both drive the same logic.
All handlers run on the node's single event loop, which is the only
writer of its ChainStore.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass
from typing import Optional, Protocol

from . import events, wire
from .chain import (
    Block,
    ChainStore,
    GenesisConfig,
    InsertOutcome,
    InvalidBlockError,
    genesis_block,
    make_block,
    pow_threshold,
    pow_valid,
    serialize_prefix,
    serialize_suffix,
    verify_block,
)

log = logging.getLogger(__name__)

SYNC_BATCH = 128  # blocks per GetBlocks request, within the wire cap


class IncompatiblePeerError(RuntimeError):
    """Handshake failed: peer runs a different chain."""


@dataclass(frozen=True)
class NodeConfig:
    node_id: str
    genesis: GenesisConfig
    peers: tuple[str, ...] = ()
    # attempts/sec; None means unlimited (real mode only — the simulator
    # needs a finite rate to place attempts on its clock)
    hashrate_limit: Optional[float] = None
    listen: Optional[str] = None


@dataclass(frozen=True, slots=True)
class Candidate:
    """What the mining engine is currently hashing against."""

    number: int
    parent_hash: bytes
    miner_id: str
    difficulty: int


class Runtime(Protocol):
    def now_ms(self) -> float: ...

    def send(self, peer_id: str, message: wire.Message) -> None: ...

    def emit(self, event: events.NodeEvent) -> None: ...

    def set_candidate(self, candidate: Optional[Candidate]) -> None: ...

    def send_control(self, message: wire.Message) -> None: ...

    def shutdown(self) -> None: ...


def mine_step(store: ChainStore, miner_id: str, difficulty: int, rng, timestamp_ms: int = 0) -> Optional[Block]:
    """One nonce attempt on a candidate extending the current head.

    Returns the block iff its hash clears the difficulty target. The
    candidate is rebuilt from the head on every call, so a head change
    between calls never leaves a stale parent.
    """
    head = store.head_block
    block = make_block(
        number=head.number + 1,
        parent_hash=head.hash,
        miner_id=miner_id,
        nonce=rng.getrandbits(64),
        difficulty=difficulty,
        timestamp_ms=timestamp_ms,
    )
    return block if pow_valid(block) else None


def search_nonces(
    candidate: Candidate,
    timestamp_ms: int,
    start_nonce: int,
    max_attempts: Optional[int] = None,
) -> Optional[tuple[int, int]]:
    """Sequential nonce scan; returns (nonce, attempts used) on success.

    This is the hot loop: one sha256 per attempt over the canonical
    serialization with only the nonce varying.
    """
    prefix = serialize_prefix(candidate.number, candidate.parent_hash, candidate.miner_id)
    suffix = serialize_suffix(candidate.difficulty, timestamp_ms)
    if candidate.difficulty == 1:
        return start_nonce, 1
    threshold = pow_threshold(candidate.difficulty).to_bytes(32, "big")
    sha = hashlib.sha256
    pack = struct.Struct(">Q").pack
    mask = 2**64 - 1
    attempt = 0
    nonce = start_nonce
    while max_attempts is None or attempt < max_attempts:
        attempt += 1
        if sha(prefix + pack(nonce) + suffix).digest() < threshold:
            return nonce, attempt
        nonce = (nonce + 1) & mask
    return None


@dataclass
class _SyncState:
    peer: str
    requested: int  # block count asked for in the in-flight GetBlocks
    restarted: bool = False


class Node:
    """One network participant; drives a ChainStore via runtime callbacks."""

    def __init__(self, config: NodeConfig, runtime: Runtime):
        self.config = config
        self.runtime = runtime
        self.node_id = config.node_id
        self.genesis = genesis_block(config.genesis)
        self.store = ChainStore(self.genesis)
        self.difficulty = config.genesis.difficulty
        self.mining_enabled = False
        self.live = False  # flips on when initial sync is done
        self.stopped = False
        self.peer_status: dict[str, wire.Status] = {}
        self.sync: Optional[_SyncState] = None
        self._sync_failures: list[str] = []
        # where a parked block came from, for the forwarding exclusion
        self._sources: dict[bytes, str] = {}

    # ------------------------------------------------------------------
    # lifecycle

    def start(self) -> None:
        if not self.config.peers:
            self._complete_sync()

    def status_message(self) -> wire.Status:
        head = self.store.head_block
        return wire.Status(
            node_id=self.node_id,
            chain_id=self.config.genesis.chain_id,
            genesis_hash=self.genesis.hash,
            head_hash=head.hash,
            head_number=head.number,
            total_difficulty=self.store.total_difficulty[head.hash],
        )

    def on_peer_link(self, peer_id: str) -> None:
        """Transport-level connection established; send our handshake."""
        self.runtime.send(peer_id, self.status_message())

    def on_peer_disconnected(self, peer_id: str) -> None:
        self.peer_status.pop(peer_id, None)
        if self.sync and self.sync.peer == peer_id:
            self._sync_failed(events.SYNC_DISCONNECT)

    # ------------------------------------------------------------------
    # inbound messages

    def on_message(self, peer_id: str, msg: wire.Message) -> None:
        if self.stopped:
            return
        if isinstance(msg, wire.Status):
            self._on_status(peer_id, msg)
        elif isinstance(msg, wire.NewBlock):
            self.on_new_block(msg.block, from_peer=peer_id)
        elif isinstance(msg, wire.GetBlocks):
            batch = self.store.mainchain_slice(msg.from_number, msg.count)
            self.runtime.send(peer_id, wire.Blocks(tuple(batch)))
        elif isinstance(msg, wire.Blocks):
            self._on_sync_batch(peer_id, msg.blocks)
        elif isinstance(msg, wire.Ping):
            self.runtime.send(peer_id, wire.Pong())
        elif isinstance(msg, wire.Pong):
            pass
        else:
            log.warning("%s: unexpected message %r from %s", self.node_id, msg, peer_id)

    def _on_status(self, peer_id: str, status: wire.Status) -> None:
        if (
            status.chain_id != self.config.genesis.chain_id
            or status.genesis_hash != self.genesis.hash
        ):
            raise IncompatiblePeerError(
                f"{self.node_id}: peer {peer_id} is on another chain "
                f"(chain_id {status.chain_id}, genesis {status.genesis_hash.hex()[:8]})"
            )
        first_contact = not self.peer_status
        self.peer_status[peer_id] = status
        if self.live or self.sync:
            return
        if status.total_difficulty > self.store.total_difficulty[self.store.head]:
            self._start_sync(peer_id)
        elif first_contact:
            self._complete_sync()

    # ------------------------------------------------------------------
    # blocks: gossip and mining

    def on_new_block(self, block: Block, from_peer: Optional[str]) -> None:
        """Insert a received or self-mined block and relay it onward.

        Duplicates are dropped before logging, so each node logs at most
        one Received per block. Invalid blocks are dropped and never
        forwarded.
        """
        if block.hash in self.store.blocks or self.store.has_pending(block.hash):
            return
        try:
            # validate before logging so the event log only carries real blocks
            verify_block(block)
        except InvalidBlockError as exc:
            log.warning("%s: dropped invalid block from %s: %s", self.node_id, from_peer, exc)
            return
        if from_peer is not None:
            self.runtime.emit(events.Received(self._now(), self.node_id, block, from_peer))
        else:
            self.runtime.emit(events.Mined(self._now(), self.node_id, block))
        report = self.store.insert(block)

        if report.outcome is InsertOutcome.ORPHANED_PENDING:
            if from_peer is not None:
                self._sources[block.hash] = from_peer
                # a gap above our head means we missed history; catch up
                if block.number > self.store.height + 1 and self.sync is None:
                    self._start_sync(from_peer)
            return

        self._after_accepts(report.accepted, first_source=from_peer)

    def _after_accepts(self, accepted, first_source: Optional[str]) -> None:
        for i, acc in enumerate(accepted):
            if acc.head_move is not None:
                self.runtime.emit(
                    events.HeadChanged(
                        self._now(),
                        self.node_id,
                        acc.head_move.old_head,
                        acc.head_move.new_head,
                        acc.head_move.new_height,
                        acc.head_move.reorg_depth,
                    )
                )
            source = first_source if i == 0 else self._sources.pop(acc.block.hash, None)
            self._forward(acc.block, exclude=source)
        self._rearm_miner()

    def _forward(self, block: Block, exclude: Optional[str]) -> None:
        for peer_id in sorted(self.peer_status):
            if peer_id != exclude:
                self.runtime.send(peer_id, wire.NewBlock(block))

    def on_block_found(self, block: Block) -> None:
        """Mining engine produced a block for a (possibly stale) candidate."""
        if self.stopped or not self.mining_enabled:
            return
        self.on_new_block(block, from_peer=None)

    def current_candidate(self) -> Candidate:
        head = self.store.head_block
        return Candidate(head.number + 1, head.hash, self.node_id, self.difficulty)

    def _rearm_miner(self) -> None:
        if self.mining_enabled and self.live and not self.stopped:
            self.runtime.set_candidate(self.current_candidate())

    # ------------------------------------------------------------------
    # initial sync

    def _start_sync(self, peer_id: str) -> None:
        self.runtime.emit(events.SyncStarted(self._now(), self.node_id, peer_id))
        self.sync = _SyncState(peer=peer_id, requested=0)
        self._request_batch(self.store.height + 1)

    def _request_batch(self, from_number: int) -> None:
        assert self.sync is not None
        self.sync.requested = SYNC_BATCH
        self.runtime.send(self.sync.peer, wire.GetBlocks(from_number, SYNC_BATCH))

    def _on_sync_batch(self, peer_id: str, batch: tuple[Block, ...]) -> None:
        if self.sync is None or peer_id != self.sync.peer:
            return  # stale reply from an abandoned sync
        if not batch:
            self._complete_sync()
            return
        if batch[0].parent_hash not in self.store.blocks:
            # The peer's answer no longer extends what it sent before: it
            # reorganized mid-sync. Reset and re-download from the bottom;
            # duplicate inserts are cheap and stop at the fork point.
            self._sync_failed(events.SYNC_PEER_REORGED)
            return
        for block in batch:
            if block.hash in self.store.blocks or self.store.has_pending(block.hash):
                continue
            self.runtime.emit(events.Received(self._now(), self.node_id, block, peer_id))
            report = self.store.insert(block)
            self._emit_head_moves(report.accepted)
        if len(batch) < self.sync.requested:
            self._complete_sync()
        else:
            self._request_batch(batch[-1].number + 1)

    def _emit_head_moves(self, accepted) -> None:
        for acc in accepted:
            if acc.head_move is not None:
                self.runtime.emit(
                    events.HeadChanged(
                        self._now(),
                        self.node_id,
                        acc.head_move.old_head,
                        acc.head_move.new_head,
                        acc.head_move.new_height,
                        acc.head_move.reorg_depth,
                    )
                )
            self._sources.pop(acc.block.hash, None)

    def _sync_failed(self, reason: str) -> None:
        assert self.sync is not None
        failed_peer = self.sync.peer
        self.runtime.emit(events.SyncFailed(self._now(), self.node_id, reason))
        self._sync_failures.append(reason)
        if reason == events.SYNC_PEER_REORGED:
            # manual reset: restart against the same peer from the bottom
            self.sync = _SyncState(peer=failed_peer, restarted=True, requested=0)
            self._request_batch(1)
            return
        candidates = [p for p in sorted(self.peer_status) if p != failed_peer]
        if candidates:
            self._start_sync(candidates[0])
        else:
            self.sync = None
            self._complete_sync()

    def _complete_sync(self) -> None:
        self.sync = None
        self.live = True
        self.runtime.emit(events.SyncCompleted(self._now(), self.node_id, self.store.height))
        self._rearm_miner()

    # ------------------------------------------------------------------
    # commands

    def on_command(self, cmd: wire.Command) -> None:
        if isinstance(cmd, wire.StartMining):
            self.mining_enabled = True
            self._rearm_miner()
        elif isinstance(cmd, wire.StopMining):
            self.mining_enabled = False
            self.runtime.set_candidate(None)
        elif isinstance(cmd, wire.ReportStatus):
            self.runtime.send_control(self.status_message())
            # last two mainchain blocks ride along for the panel tiles
            chain = self.store.mainchain()
            self.runtime.send_control(wire.Blocks(tuple(chain[-2:])))
        elif isinstance(cmd, wire.Shutdown):
            self.stopped = True
            self.mining_enabled = False
            self.runtime.set_candidate(None)
            self.runtime.shutdown()
        else:
            log.warning("%s: unknown command %r", self.node_id, cmd)

    def _now(self) -> int:
        return int(self.runtime.now_ms())
