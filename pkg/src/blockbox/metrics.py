"""Consensus-quality metrics over reconstructed per-node event logs.

The global block DAG is rebuilt from every node's Mined/Received events;
the canonical chain is the max-total-difficulty head held by any node at
run end. Four metrics come out: mainchain rate, branching ratio, per-node
contribution ratio and per-node initial consensus. All arithmetic is
exact (fractions.Fraction); results are independent of log and node
ordering.

Genesis is configured rather than produced, so it is excluded from all
block counts. Blocks whose ancestry never connects to genesis are
reported as detached and excluded as well: they were never candidates for
inclusion, and counting them would conflate log loss with consensus
failure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .chain import Block, block_hash
from .events import HeadChanged, Mined, NodeEvent, Received


class LogCorruptionError(ValueError):
    pass


class InvalidInputError(ValueError):
    pass


@dataclass
class BlockDag:
    """Everything the metrics need, reconstructed from logs."""

    genesis_hash: bytes
    blocks: dict[bytes, Block]  # connected, genesis excluded
    mainchain: list[Block]  # ascending height, genesis excluded
    theta: list[Block]  # connected blocks off the mainchain
    miner_of: dict[bytes, str]  # hash -> node id, from Mined events
    mined_at: dict[bytes, int]  # hash -> first Mined timestamp
    detached: list[Block]
    node_ids: list[str]
    total_difficulty: dict[bytes, int] = field(repr=False, default_factory=dict)

    @property
    def mainchain_hashes(self) -> set[bytes]:
        return {b.hash for b in self.mainchain}


def build_dag(logs: dict[str, list[NodeEvent]]) -> BlockDag:
    """Merge per-node logs into one DAG and extract the canonical chain.

    Raises LogCorruptionError on conflicting blocks or duplicate mining
    attributions, InvalidInputError when no common genesis exists.
    """
    blocks: dict[bytes, Block] = {}
    miner_of: dict[bytes, str] = {}
    mined_at: dict[bytes, int] = {}
    final_head: dict[bytes, None] = {}

    for node_id in sorted(logs):
        last_head: Optional[bytes] = None
        for ev in logs[node_id]:
            blk = None
            if isinstance(ev, (Mined, Received)):
                blk = ev.block
            if blk is not None:
                if blk.hash != block_hash(blk):
                    raise LogCorruptionError(f"block {blk.hash.hex()[:12]}: hash/field mismatch")
                prev = blocks.get(blk.hash)
                if prev is not None and prev != blk:
                    raise LogCorruptionError(
                        f"two different blocks share hash {blk.hash.hex()[:12]}"
                    )
                blocks.setdefault(blk.hash, blk)
            if isinstance(ev, Mined):
                if ev.block.hash in miner_of:
                    raise LogCorruptionError(
                        f"duplicate Mined events for {ev.block.hash.hex()[:12]}"
                    )
                miner_of[ev.block.hash] = node_id
                mined_at[ev.block.hash] = ev.t_ms
            if isinstance(ev, HeadChanged):
                last_head = ev.new_hash
        if last_head is not None:
            final_head[last_head] = None

    produced = {h: b for h, b in blocks.items() if not b.is_genesis}
    genesis_hash = _common_genesis(produced)

    # connect ancestry; anything that does not reach genesis is detached
    connected: dict[bytes, bool] = {}

    def reaches_genesis(h: bytes) -> bool:
        path = []
        cur = h
        while cur not in connected:
            blk = produced.get(cur)
            if blk is None:
                ok = cur == genesis_hash
                for p in path:
                    connected[p] = ok
                return ok
            path.append(cur)
            cur = blk.parent_hash
        ok = connected[cur]
        for p in path:
            connected[p] = ok
        return ok

    body = {h: b for h, b in produced.items() if reaches_genesis(h)}
    detached = [b for h, b in sorted(produced.items()) if not connected[h]]

    # total difficulty relative to genesis (a common offset cancels out)
    td: dict[bytes, int] = {genesis_hash: 0}

    def total_difficulty(h: bytes) -> int:
        stack = []
        cur = h
        while cur not in td:
            stack.append(cur)
            cur = body[cur].parent_hash
        value = td[cur]
        for x in reversed(stack):
            value += body[x].difficulty
            td[x] = value
        return td[h]

    candidates = [h for h in final_head if h in body or h == genesis_hash]
    if not candidates:
        if not body:
            candidates = [genesis_hash]
        else:
            raise InvalidInputError("no node's final head is connected to genesis")
    # highest cumulative difficulty; lexicographically lowest hash on ties
    head = min(candidates, key=lambda h: (-total_difficulty(h), h))

    mainchain: list[Block] = []
    cur = head
    while cur != genesis_hash:
        mainchain.append(body[cur])
        cur = body[cur].parent_hash
    mainchain.reverse()

    chain_hashes = {b.hash for b in mainchain}
    theta = [b for h, b in sorted(body.items()) if h not in chain_hashes]

    for h in body:
        total_difficulty(h)

    return BlockDag(
        genesis_hash=genesis_hash,
        blocks=body,
        mainchain=mainchain,
        theta=theta,
        miner_of={h: m for h, m in miner_of.items() if h in body},
        mined_at={h: t for h, t in mined_at.items() if h in body},
        detached=detached,
        node_ids=sorted(logs),
        total_difficulty=td,
    )


def _common_genesis(produced: dict[bytes, Block]) -> bytes:
    roots = {b.parent_hash for b in produced.values() if b.number == 1}
    if len(roots) > 1:
        raise InvalidInputError("logs reference more than one genesis")
    if len(roots) == 1:
        return roots.pop()
    # no height-1 block anywhere: follow any chain down to its root claim
    if produced:
        raise InvalidInputError("cannot locate genesis: no height-1 block in any log")
    raise InvalidInputError("logs contain no blocks")


def mainchain_rate(dag: BlockDag) -> Fraction:
    """Share of all produced blocks that ended up canonical."""
    if not dag.blocks:
        raise InvalidInputError("no produced blocks")
    return Fraction(len(dag.mainchain), len(dag.blocks))


def branching_ratio(dag: BlockDag) -> Fraction:
    """Average number of off-chain blocks sharing a parent with each
    mainchain block; zero exactly when the run produced no forks."""
    if not dag.mainchain:
        raise InvalidInputError("empty mainchain")
    theta_parents: dict[bytes, int] = {}
    for c in dag.theta:
        theta_parents[c.parent_hash] = theta_parents.get(c.parent_hash, 0) + 1
    hits = sum(theta_parents.get(b.parent_hash, 0) for b in dag.mainchain)
    return Fraction(hits, len(dag.mainchain))


def contribution_ratio(dag: BlockDag) -> tuple[dict[str, Fraction], bool]:
    """Per-node share of the mainchain, plus whether attribution covered
    every canonical block (when not, the shares sum below one)."""
    if not dag.mainchain:
        raise InvalidInputError("empty mainchain")
    counts = {node_id: 0 for node_id in dag.node_ids}
    complete = True
    for b in dag.mainchain:
        miner = dag.miner_of.get(b.hash)
        if miner is None:
            complete = False
        elif miner in counts:
            counts[miner] += 1
        else:
            counts[miner] = 1
    m = len(dag.mainchain)
    return {n: Fraction(c, m) for n, c in counts.items()}, complete


def initial_consensus(dag: BlockDag) -> dict[str, Optional[int]]:
    """Mainchain height at which each node first influenced the canonical
    chain; None when every block the node produced was discarded."""
    chain = dag.mainchain_hashes
    first: dict[str, Optional[int]] = {node_id: None for node_id in dag.node_ids}
    best: dict[str, tuple[int, int]] = {}
    for h, miner in dag.miner_of.items():
        if h not in chain:
            continue
        key = (dag.mined_at[h], dag.blocks[h].number)
        if miner not in best or key < best[miner]:
            best[miner] = key
            first[miner] = dag.blocks[h].number
    return first


@dataclass
class MetricsReport:
    mu: Fraction
    branching: Fraction
    contribution: dict[str, Fraction]
    initial: dict[str, Optional[int]]
    total_blocks: int
    mainchain_blocks: int
    offchain_blocks: int
    detached_blocks: int
    attribution_complete: bool

    def to_dict(self) -> dict:
        return {
            "mainchain_rate": _frac(self.mu),
            "branching_ratio": _frac(self.branching),
            "contribution_ratio": {n: _frac(c) for n, c in sorted(self.contribution.items())},
            "initial_consensus": {
                n: (i if i is not None else "not-achieved")
                for n, i in sorted(self.initial.items())
            },
            "counts": {
                "total_blocks": self.total_blocks,
                "mainchain_blocks": self.mainchain_blocks,
                "offchain_blocks": self.offchain_blocks,
                "detached_blocks": self.detached_blocks,
            },
            "attribution_complete": self.attribution_complete,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        lines = [
            f"mainchain rate    mu = {self.mu} ({float(self.mu):.4f})",
            f"branching ratio    F = {self.branching} ({float(self.branching):.4f})",
            f"blocks: total {self.total_blocks}, mainchain {self.mainchain_blocks}, "
            f"off-chain {self.offchain_blocks}, detached {self.detached_blocks}",
            "",
            f"{'node':<10} {'contribution':>14} {'initial consensus':>19}",
        ]
        for node_id in sorted(self.contribution):
            c = self.contribution[node_id]
            i = self.initial.get(node_id)
            lines.append(
                f"{node_id:<10} {f'{c} ({float(c):.3f})':>14} "
                f"{('not-achieved' if i is None else str(i)):>19}"
            )
        if not self.attribution_complete:
            lines.append("warning: some mainchain blocks lack a Mined attribution")
        return "\n".join(lines) + "\n"


def _frac(f: Fraction) -> dict:
    return {"num": f.numerator, "den": f.denominator, "value": float(f)}


def compute_metrics(logs: dict[str, list[NodeEvent]]) -> MetricsReport:
    dag = build_dag(logs)
    contribution, complete = contribution_ratio(dag)
    return MetricsReport(
        mu=mainchain_rate(dag),
        branching=branching_ratio(dag),
        contribution=contribution,
        initial=initial_consensus(dag),
        total_blocks=len(dag.blocks),
        mainchain_blocks=len(dag.mainchain),
        offchain_blocks=len(dag.theta),
        detached_blocks=len(dag.detached),
        attribution_complete=complete,
    )
