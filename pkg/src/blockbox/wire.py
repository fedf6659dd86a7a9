"""Peer and command message formats with length-prefixed binary framing.

Frame layout: 4-byte big-endian payload length, then a 1-byte variant tag
and the variant body. Integers are fixed-width big-endian; strings are a
u16 length followed by utf-8 bytes; blocks ride as their canonical
serialization (the hash is recomputed on decode). The exact layout is
frozen by the golden fixtures under tests/golden/.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Union

from .chain import Block, canonical_serialize, make_block

MAX_FRAME_BYTES = 16 * 1024 * 1024
MAX_GET_BLOCKS = 512

_U64 = struct.Struct(">Q")
_U32 = struct.Struct(">I")
_U16 = struct.Struct(">H")


class FramingError(ValueError):
    """Frame truncated or structurally broken."""


class ProtocolError(ValueError):
    """Unknown variant tag or malformed message body."""


class OversizeError(ValueError):
    """Frame length exceeds the 16 MiB cap."""


@dataclass(frozen=True, slots=True)
class Status:
    node_id: str
    chain_id: int
    genesis_hash: bytes
    head_hash: bytes
    head_number: int
    total_difficulty: int


@dataclass(frozen=True, slots=True)
class NewBlock:
    block: Block


@dataclass(frozen=True, slots=True)
class GetBlocks:
    from_number: int
    count: int


@dataclass(frozen=True, slots=True)
class Blocks:
    blocks: tuple[Block, ...]


@dataclass(frozen=True, slots=True)
class Ping:
    pass


@dataclass(frozen=True, slots=True)
class Pong:
    pass


# Orchestrator commands share the frame format with peer messages but use
# a separate tag range.
@dataclass(frozen=True, slots=True)
class StartMining:
    pass


@dataclass(frozen=True, slots=True)
class StopMining:
    pass


@dataclass(frozen=True, slots=True)
class Shutdown:
    pass


@dataclass(frozen=True, slots=True)
class ReportStatus:
    pass


Message = Union[Status, NewBlock, GetBlocks, Blocks, Ping, Pong]
Command = Union[StartMining, StopMining, Shutdown, ReportStatus]

_TAG_STATUS = 0x01
_TAG_NEW_BLOCK = 0x02
_TAG_GET_BLOCKS = 0x03
_TAG_BLOCKS = 0x04
_TAG_PING = 0x05
_TAG_PONG = 0x06
_TAG_START_MINING = 0x10
_TAG_STOP_MINING = 0x11
_TAG_SHUTDOWN = 0x12
_TAG_REPORT_STATUS = 0x13

_BLOCK_FIXED = 8 + 32 + 2  # number + parent + miner length, before miner bytes


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ProtocolError("string too long")
    return _U16.pack(len(raw)) + raw


def _pack_u64(value: int, what: str) -> bytes:
    if not 0 <= value < 2**64:
        raise ProtocolError(f"{what} out of u64 range")
    return _U64.pack(value)


def _check_blocks_order(blocks: tuple[Block, ...]) -> None:
    for prev, cur in zip(blocks, blocks[1:]):
        if cur.number < prev.number:
            raise ProtocolError("Blocks list not ascending by height")
        if cur.number == prev.number + 1 and cur.parent_hash != prev.hash:
            raise ProtocolError("contiguous Blocks entries not parent-linked")


def _encode_block(block: Block) -> bytes:
    return canonical_serialize(block)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise ProtocolError("message body truncated")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u64(self) -> int:
        return _U64.unpack(self.take(8))[0]

    def u16(self) -> int:
        return _U16.unpack(self.take(2))[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    def block(self) -> Block:
        number = self.u64()
        parent = self.take(32)
        miner = self.string()
        nonce = self.u64()
        difficulty = self.u64()
        timestamp_ms = self.u64()
        return make_block(number, parent, miner, nonce, difficulty, timestamp_ms)

    def done(self) -> None:
        if self.pos != len(self.buf):
            raise ProtocolError("trailing bytes in message body")


def encode(message: Message | Command) -> bytes:
    """Encode a message into a complete frame (length prefix included)."""
    if isinstance(message, Status):
        if len(message.genesis_hash) != 32 or len(message.head_hash) != 32:
            raise ProtocolError("Status hashes must be 32 bytes")
        payload = (
            bytes([_TAG_STATUS])
            + _pack_str(message.node_id)
            + _pack_u64(message.chain_id, "chain_id")
            + message.genesis_hash
            + message.head_hash
            + _pack_u64(message.head_number, "head_number")
            + _pack_u64(message.total_difficulty, "total_difficulty")
        )
    elif isinstance(message, NewBlock):
        payload = bytes([_TAG_NEW_BLOCK]) + _encode_block(message.block)
    elif isinstance(message, GetBlocks):
        if not 1 <= message.count <= MAX_GET_BLOCKS:
            raise ProtocolError(f"GetBlocks.count must be in [1, {MAX_GET_BLOCKS}]")
        payload = (
            bytes([_TAG_GET_BLOCKS])
            + _pack_u64(message.from_number, "from_number")
            + _U16.pack(message.count)
        )
    elif isinstance(message, Blocks):
        _check_blocks_order(message.blocks)
        payload = bytes([_TAG_BLOCKS]) + _U16.pack(len(message.blocks))
        payload += b"".join(_encode_block(b) for b in message.blocks)
    elif isinstance(message, Ping):
        payload = bytes([_TAG_PING])
    elif isinstance(message, Pong):
        payload = bytes([_TAG_PONG])
    elif isinstance(message, StartMining):
        payload = bytes([_TAG_START_MINING])
    elif isinstance(message, StopMining):
        payload = bytes([_TAG_STOP_MINING])
    elif isinstance(message, Shutdown):
        payload = bytes([_TAG_SHUTDOWN])
    elif isinstance(message, ReportStatus):
        payload = bytes([_TAG_REPORT_STATUS])
    else:
        raise ProtocolError(f"cannot encode {type(message).__name__}")
    if len(payload) > MAX_FRAME_BYTES:
        raise OversizeError("frame exceeds 16 MiB cap")
    return _U32.pack(len(payload)) + payload


def decode_payload(payload: bytes) -> Message | Command:
    if not payload:
        raise FramingError("empty frame payload")
    tag, body = payload[0], payload[1:]
    r = _Reader(body)
    if tag == _TAG_STATUS:
        msg: Message | Command = Status(
            node_id=r.string(),
            chain_id=r.u64(),
            genesis_hash=r.take(32),
            head_hash=r.take(32),
            head_number=r.u64(),
            total_difficulty=r.u64(),
        )
    elif tag == _TAG_NEW_BLOCK:
        msg = NewBlock(r.block())
    elif tag == _TAG_GET_BLOCKS:
        msg = GetBlocks(from_number=r.u64(), count=r.u16())
        if not 1 <= msg.count <= MAX_GET_BLOCKS:
            raise ProtocolError(f"GetBlocks.count must be in [1, {MAX_GET_BLOCKS}]")
    elif tag == _TAG_BLOCKS:
        n = r.u16()
        blocks = tuple(r.block() for _ in range(n))
        _check_blocks_order(blocks)
        msg = Blocks(blocks)
    elif tag == _TAG_PING:
        msg = Ping()
    elif tag == _TAG_PONG:
        msg = Pong()
    elif tag == _TAG_START_MINING:
        msg = StartMining()
    elif tag == _TAG_STOP_MINING:
        msg = StopMining()
    elif tag == _TAG_SHUTDOWN:
        msg = Shutdown()
    elif tag == _TAG_REPORT_STATUS:
        msg = ReportStatus()
    else:
        raise ProtocolError(f"unknown message tag 0x{tag:02x}")
    r.done()
    return msg


def decode(frame: bytes) -> Message | Command:
    """Decode one complete frame; the exact inverse of encode()."""
    if len(frame) < 4:
        raise FramingError("frame shorter than length prefix")
    (length,) = _U32.unpack(frame[:4])
    if length > MAX_FRAME_BYTES:
        raise OversizeError("frame exceeds 16 MiB cap")
    if len(frame) != 4 + length:
        raise FramingError("frame length mismatch")
    return decode_payload(frame[4:])


class FrameDecoder:
    """Incremental decoder for a byte stream of frames."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[Message | Command]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < 4:
                return out
            (length,) = _U32.unpack(bytes(self._buf[:4]))
            if length > MAX_FRAME_BYTES:
                raise OversizeError("frame exceeds 16 MiB cap")
            if len(self._buf) < 4 + length:
                return out
            payload = bytes(self._buf[4 : 4 + length])
            del self._buf[: 4 + length]
            out.append(decode_payload(payload))


@dataclass(frozen=True, slots=True)
class LatencyModel:
    """Deterministic one-way link delay: base_ms + uniform[0, jitter_ms).

    The jitter draw depends only on (seed, source, destination, message
    index), so identical configurations replay identical delays.
    """

    base_ms: float = 0.0
    jitter_ms: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.base_ms < 0 or self.jitter_ms < 0:
            raise ValueError("latency parameters must be non-negative")

    def delay_ms(self, source: str, destination: str, index: int) -> float:
        if self.jitter_ms == 0:
            return self.base_ms
        key = f"{self.seed}|{source}|{destination}|{index}".encode()
        u = int.from_bytes(hashlib.sha256(key).digest()[:8], "big") / 2**64
        return self.base_ms + u * self.jitter_ms
