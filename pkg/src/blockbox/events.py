"""Per-node event records and their line-delimited JSON persistence.

One JSON object per line, schema version 1. Field order is fixed so that
identical runs serialize to identical bytes. These logs are the sole
input to the metrics engine.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

from .chain import Block, block_hash

SCHEMA_VERSION = 1

SYNC_PEER_REORGED = "peer-reorged"
SYNC_DISCONNECT = "disconnect"


@dataclass(frozen=True, slots=True)
class Mined:
    t_ms: int
    node_id: str
    block: Block


@dataclass(frozen=True, slots=True)
class Received:
    t_ms: int
    node_id: str
    block: Block
    from_peer: str


@dataclass(frozen=True, slots=True)
class HeadChanged:
    t_ms: int
    node_id: str
    old_hash: bytes
    new_hash: bytes
    new_height: int
    reorg_depth: int


@dataclass(frozen=True, slots=True)
class SyncStarted:
    t_ms: int
    node_id: str
    peer: str


@dataclass(frozen=True, slots=True)
class SyncCompleted:
    t_ms: int
    node_id: str
    height: int


@dataclass(frozen=True, slots=True)
class SyncFailed:
    t_ms: int
    node_id: str
    reason: str


NodeEvent = Union[Mined, Received, HeadChanged, SyncStarted, SyncCompleted, SyncFailed]


class LogFormatError(ValueError):
    pass


def block_to_dict(block: Block) -> dict:
    return {
        "number": block.number,
        "parent": block.parent_hash.hex(),
        "miner": block.miner_id,
        "nonce": block.nonce,
        "difficulty": block.difficulty,
        "timestamp_ms": block.timestamp_ms,
        "hash": block.hash.hex(),
    }


def block_from_dict(d: dict) -> Block:
    try:
        block = Block(
            number=d["number"],
            parent_hash=bytes.fromhex(d["parent"]),
            miner_id=d["miner"],
            nonce=d["nonce"],
            difficulty=d["difficulty"],
            timestamp_ms=d["timestamp_ms"],
            hash=bytes.fromhex(d["hash"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise LogFormatError(f"bad block record: {exc}") from exc
    if block_hash(block) != block.hash:
        raise LogFormatError(f"block {d['hash']}: hash does not match fields")
    return block


def to_json_line(event: NodeEvent) -> str:
    base = {"v": SCHEMA_VERSION, "t": event.t_ms, "node": event.node_id}
    if isinstance(event, Mined):
        base.update(type="mined", block=block_to_dict(event.block))
    elif isinstance(event, Received):
        base.update(type="received", block=block_to_dict(event.block), from_peer=event.from_peer)
    elif isinstance(event, HeadChanged):
        base.update(
            type="head_changed",
            old=event.old_hash.hex(),
            new=event.new_hash.hex(),
            height=event.new_height,
            reorg_depth=event.reorg_depth,
        )
    elif isinstance(event, SyncStarted):
        base.update(type="sync_started", peer=event.peer)
    elif isinstance(event, SyncCompleted):
        base.update(type="sync_completed", height=event.height)
    elif isinstance(event, SyncFailed):
        base.update(type="sync_failed", reason=event.reason)
    else:
        raise LogFormatError(f"unknown event type {type(event).__name__}")
    return json.dumps(base, separators=(",", ":"))


def from_json_line(line: str) -> NodeEvent:
    try:
        d = json.loads(line)
    except json.JSONDecodeError as exc:
        raise LogFormatError(f"bad log line: {exc}") from exc
    if d.get("v") != SCHEMA_VERSION:
        raise LogFormatError(f"unsupported log schema version {d.get('v')!r}")
    t, node, kind = d["t"], d["node"], d["type"]
    if kind == "mined":
        return Mined(t, node, block_from_dict(d["block"]))
    if kind == "received":
        return Received(t, node, block_from_dict(d["block"]), d["from_peer"])
    if kind == "head_changed":
        return HeadChanged(
            t, node, bytes.fromhex(d["old"]), bytes.fromhex(d["new"]), d["height"], d["reorg_depth"]
        )
    if kind == "sync_started":
        return SyncStarted(t, node, d["peer"])
    if kind == "sync_completed":
        return SyncCompleted(t, node, d["height"])
    if kind == "sync_failed":
        return SyncFailed(t, node, d["reason"])
    raise LogFormatError(f"unknown event type {kind!r}")


def dump_log(events: list[NodeEvent]) -> str:
    return "".join(to_json_line(e) + "\n" for e in events)


def parse_log(text: str) -> list[NodeEvent]:
    return [from_json_line(line) for line in text.splitlines() if line.strip()]
