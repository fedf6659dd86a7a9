"""Blocks, proof-of-work validity, chain storage and fork choice.

Every node owns one ChainStore. The store is single-writer: all mutations
go through the owning node's event loop. Reads of a quiescent store are
safe from other threads.
"""

from __future__ import annotations

import hashlib
import struct
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Optional

ZERO_HASH = b"\x00" * 32
HASH_LEN = 32

# Parked out-of-order blocks, FIFO-evicted past this count.
ORPHAN_POOL_CAP = 1024

_U64 = struct.Struct(">Q")
_U16 = struct.Struct(">H")


class InvalidParameterError(ValueError):
    pass


class InvalidBlockError(ValueError):
    """Block failed hash or proof-of-work verification."""


@dataclass(frozen=True, slots=True)
class GenesisConfig:
    """Parameters folded into the genesis block so distinct experiments
    produce distinct chains."""

    chain_id: int
    difficulty: int
    extra: bytes = b""

    def __post_init__(self) -> None:
        if self.difficulty < 1:
            raise InvalidParameterError("difficulty must be >= 1")
        if not 0 <= self.chain_id < 2**64:
            raise InvalidParameterError("chain_id must fit in u64")


@dataclass(frozen=True, slots=True)
class Block:
    number: int
    parent_hash: bytes
    miner_id: str
    nonce: int
    difficulty: int
    timestamp_ms: int
    hash: bytes

    @property
    def is_genesis(self) -> bool:
        return self.number == 0


def serialize_prefix(number: int, parent_hash: bytes, miner_id: str) -> bytes:
    miner = miner_id.encode("utf-8")
    return _U64.pack(number) + parent_hash + _U16.pack(len(miner)) + miner


def serialize_suffix(difficulty: int, timestamp_ms: int) -> bytes:
    return _U64.pack(difficulty) + _U64.pack(timestamp_ms)


def canonical_serialize(block: Block) -> bytes:
    """Deterministic wire encoding of all fields except the hash.

    Fixed field order and fixed-width big-endian integers: number (u64),
    parent_hash (32 bytes), miner_id (u16 length + utf-8 bytes), nonce
    (u64), difficulty (u64), timestamp_ms (u64). This layout is frozen by
    the committed golden-bytes fixture.
    """
    return (
        serialize_prefix(block.number, block.parent_hash, block.miner_id)
        + _U64.pack(block.nonce)
        + serialize_suffix(block.difficulty, block.timestamp_ms)
    )


def block_hash(block: Block) -> bytes:
    return hashlib.sha256(canonical_serialize(block)).digest()


def make_block(
    number: int,
    parent_hash: bytes,
    miner_id: str,
    nonce: int,
    difficulty: int,
    timestamp_ms: int,
) -> Block:
    """Build a block with its hash computed from the canonical serialization."""
    b = Block(number, parent_hash, miner_id, nonce, difficulty, timestamp_ms, b"")
    return Block(number, parent_hash, miner_id, nonce, difficulty, timestamp_ms, block_hash(b))


def genesis_block(config: GenesisConfig) -> Block:
    """Height-0 block shared by every node of an experiment.

    chain_id rides in the nonce and extra in the miner id, so any change
    to the config changes the genesis hash. Genesis is exempt from the
    proof-of-work check (it is configured, not mined).
    """
    return make_block(
        number=0,
        parent_hash=ZERO_HASH,
        miner_id="genesis:" + config.extra.hex(),
        nonce=config.chain_id,
        difficulty=config.difficulty,
        timestamp_ms=0,
    )


def pow_threshold(difficulty: int) -> int:
    if difficulty < 1:
        raise InvalidParameterError("difficulty must be >= 1")
    return (1 << 256) // difficulty


def pow_valid(block: Block) -> bool:
    """True iff the hash, read as a big-endian 256-bit integer, is below
    floor(2^256 / difficulty). Per-attempt success probability is 1/difficulty."""
    return int.from_bytes(block.hash, "big") < pow_threshold(block.difficulty)


def verify_block(block: Block) -> None:
    """Raise InvalidBlockError unless the hash matches the fields and the
    proof-of-work threshold holds (genesis skips the PoW check)."""
    if len(block.parent_hash) != HASH_LEN or len(block.hash) != HASH_LEN:
        raise InvalidBlockError("hashes must be 32 bytes")
    if block.hash != block_hash(block):
        raise InvalidBlockError("hash does not match canonical serialization")
    if (block.number == 0) != (block.parent_hash == ZERO_HASH):
        raise InvalidBlockError("number 0 and all-zero parent must coincide")
    if block.number > 0 and not pow_valid(block):
        raise InvalidBlockError("proof-of-work below difficulty target")


class InsertOutcome(Enum):
    EXTENDS_HEAD = "accepted-extends-head"
    SIDE_CHAIN = "accepted-side-chain"
    REORG = "reorg"
    DUPLICATE = "duplicate"
    ORPHANED_PENDING = "orphaned-pending"


@dataclass(frozen=True, slots=True)
class HeadMove:
    old_head: bytes
    new_head: bytes
    new_height: int
    reorg_depth: int  # blocks abandoned off the old head's chain; 0 on extension


@dataclass(frozen=True, slots=True)
class Accepted:
    block: Block
    outcome: InsertOutcome
    head_move: Optional[HeadMove]


@dataclass(frozen=True, slots=True)
class InsertReport:
    outcome: InsertOutcome  # outcome for the block passed to insert()
    accepted: tuple[Accepted, ...]  # that block plus any adopted orphans, in order
    head_before: bytes
    head_after: bytes


class ChainStore:
    """Block DAG plus the current head selected by fork choice.

    Fork choice: greatest cumulative difficulty wins; on an exact tie the
    earlier-received chain is kept (first-seen rule). Blocks whose parent
    has not arrived yet are parked in a bounded side pool and replayed
    when the parent shows up.
    """

    def __init__(self, genesis: Block | None = None):
        self.blocks: dict[bytes, Block] = {}
        self.children: dict[bytes, list[bytes]] = {}
        self.total_difficulty: dict[bytes, int] = {}
        self.head: bytes = b""
        # parent hash -> parked blocks waiting for it, oldest first
        self._pending: OrderedDict[bytes, list[Block]] = OrderedDict()
        self._pending_hashes: set[bytes] = set()
        if genesis is not None:
            self.insert(genesis)

    def __contains__(self, h: bytes) -> bool:
        return h in self.blocks

    def get(self, h: bytes) -> Optional[Block]:
        return self.blocks.get(h)

    @property
    def head_block(self) -> Block:
        return self.blocks[self.head]

    @property
    def height(self) -> int:
        return self.head_block.number

    def has_pending(self, h: bytes) -> bool:
        return h in self._pending_hashes

    def insert(self, block: Block) -> InsertReport:
        """Insert one verified block; restores all store invariants.

        Raises InvalidBlockError on a bad hash or failed proof-of-work.
        Unknown parent parks the block and reports orphaned-pending.
        """
        head_before = self.head
        verify_block(block)

        if block.hash in self.blocks or self.has_pending(block.hash):
            return InsertReport(InsertOutcome.DUPLICATE, (), head_before, self.head)

        if block.is_genesis:
            if self.blocks:
                raise InvalidBlockError("store already has a genesis")
            self.blocks[block.hash] = block
            self.children[block.hash] = []
            self.total_difficulty[block.hash] = block.difficulty
            self.head = block.hash
            move = HeadMove(b"", block.hash, 0, 0)
            acc = Accepted(block, InsertOutcome.EXTENDS_HEAD, move)
            return InsertReport(InsertOutcome.EXTENDS_HEAD, (acc,), head_before, self.head)

        if block.parent_hash not in self.blocks:
            self._park(block)
            return InsertReport(InsertOutcome.ORPHANED_PENDING, (), head_before, self.head)

        accepted = [self._link(block)]
        accepted.extend(self._adopt_pending(block.hash))
        return InsertReport(accepted[0].outcome, tuple(accepted), head_before, self.head)

    def _park(self, block: Block) -> None:
        self._pending.setdefault(block.parent_hash, []).append(block)
        self._pending_hashes.add(block.hash)
        while len(self._pending_hashes) > ORPHAN_POOL_CAP:
            parent, blocks = next(iter(self._pending.items()))
            evicted = blocks.pop(0)
            self._pending_hashes.discard(evicted.hash)
            if not blocks:
                del self._pending[parent]

    def _adopt_pending(self, parent: bytes) -> list[Accepted]:
        adopted: list[Accepted] = []
        frontier = [parent]
        while frontier:
            waiting = self._pending.pop(frontier.pop(0), [])
            for blk in waiting:
                self._pending_hashes.discard(blk.hash)
                if blk.hash in self.blocks:
                    continue
                adopted.append(self._link(blk))
                frontier.append(blk.hash)
        return adopted

    def _link(self, block: Block) -> Accepted:
        """Attach a block whose parent is present and apply fork choice."""
        self.blocks[block.hash] = block
        self.children[block.hash] = []
        self.children[block.parent_hash].append(block.hash)
        td = self.total_difficulty[block.parent_hash] + block.difficulty
        self.total_difficulty[block.hash] = td

        if td <= self.total_difficulty[self.head]:
            return Accepted(block, InsertOutcome.SIDE_CHAIN, None)

        old_head = self.head
        self.head = block.hash
        if block.parent_hash == old_head:
            move = HeadMove(old_head, block.hash, block.number, 0)
            return Accepted(block, InsertOutcome.EXTENDS_HEAD, move)

        depth = self.blocks[old_head].number - self._fork_point(old_head, block.hash).number
        move = HeadMove(old_head, block.hash, block.number, depth)
        outcome = InsertOutcome.EXTENDS_HEAD if depth == 0 else InsertOutcome.REORG
        return Accepted(block, outcome, move)

    def _fork_point(self, a: bytes, b: bytes) -> Block:
        """Deepest common ancestor of two stored blocks."""
        ba, bb = self.blocks[a], self.blocks[b]
        while ba.number > bb.number:
            ba = self.blocks[ba.parent_hash]
        while bb.number > ba.number:
            bb = self.blocks[bb.parent_hash]
        while ba.hash != bb.hash:
            ba = self.blocks[ba.parent_hash]
            bb = self.blocks[bb.parent_hash]
        return ba

    def mainchain(self) -> list[Block]:
        """Path from genesis to head, ascending height."""
        if not self.blocks:
            raise InvalidParameterError("store is empty")
        path = []
        cur = self.head_block
        while True:
            path.append(cur)
            if cur.is_genesis:
                break
            cur = self.blocks[cur.parent_hash]
        path.reverse()
        return path

    def mainchain_slice(self, from_number: int, count: int) -> list[Block]:
        chain = self.mainchain()
        if from_number > chain[-1].number:
            return []
        return chain[from_number : from_number + count]


def mainchain_of(store: ChainStore) -> list[Block]:
    return store.mainchain()
