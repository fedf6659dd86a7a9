"""Independent brute-force recount of the consensus metrics.

Deliberately naive: fixed-point connectivity, per-block parent walks for
cumulative difficulty, and a full double loop for the branching ratio.
Shares nothing with blockbox.metrics beyond the event types.
"""

from __future__ import annotations

from fractions import Fraction

from blockbox.events import HeadChanged, Mined, Received


def oracle_metrics(logs):
    blocks = {}
    miner = {}
    mined_t = {}
    final_heads = []
    for node in sorted(logs):
        head = None
        for ev in logs[node]:
            if isinstance(ev, (Mined, Received)):
                blocks[ev.block.hash] = ev.block
            if isinstance(ev, Mined):
                assert ev.block.hash not in miner, "duplicate attribution"
                miner[ev.block.hash] = node
                mined_t[ev.block.hash] = ev.t_ms
            if isinstance(ev, HeadChanged):
                head = ev.new_hash
        if head is not None:
            final_heads.append(head)

    produced = {h: b for h, b in blocks.items() if b.number != 0}
    genesis_hashes = {b.parent_hash for b in produced.values() if b.number == 1}
    assert len(genesis_hashes) == 1
    genesis = genesis_hashes.pop()

    # fixed-point connectivity from genesis
    connected = set()
    changed = True
    while changed:
        changed = False
        for h, b in produced.items():
            if h not in connected and (b.parent_hash == genesis or b.parent_hash in connected):
                connected.add(h)
                changed = True
    detached = [h for h in produced if h not in connected]

    def td(h):
        total = 0
        while h != genesis:
            total += produced[h].difficulty
            h = produced[h].parent_hash
        return total

    candidates = [h for h in final_heads if h in connected or h == genesis]
    best = None
    for h in candidates:
        if best is None:
            best = h
        elif td(h) > td(best) or (td(h) == td(best) and h < best):
            best = h

    mainchain = []
    cur = best
    while cur != genesis:
        mainchain.append(produced[cur])
        cur = produced[cur].parent_hash
    mainchain.reverse()
    chain_set = {b.hash for b in mainchain}
    theta = [produced[h] for h in connected if h not in chain_set]

    mu = Fraction(len(mainchain), len(connected))

    hits = 0
    for b in mainchain:
        for c in theta:
            if b.parent_hash == c.parent_hash:  # Kronecker delta on parents
                hits += 1
    branching = Fraction(hits, len(mainchain))

    contribution = {}
    complete = True
    for node in logs:
        contribution[node] = Fraction(
            sum(1 for b in mainchain if miner.get(b.hash) == node), len(mainchain)
        )
    for b in mainchain:
        if b.hash not in miner:
            complete = False

    initial = {}
    for node in logs:
        own = [
            (mined_t[h], produced[h].number)
            for h, m in miner.items()
            if m == node and h in chain_set
        ]
        initial[node] = min(own)[1] if own else None

    return {
        "mu": mu,
        "branching": branching,
        "contribution": contribution,
        "initial": initial,
        "total": len(connected),
        "mainchain": len(mainchain),
        "theta": len(theta),
        "detached": len(detached),
        "complete": complete,
    }
