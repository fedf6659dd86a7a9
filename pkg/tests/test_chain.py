import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blockbox.chain import (
    ZERO_HASH,
    Block,
    ChainStore,
    GenesisConfig,
    InsertOutcome,
    InvalidBlockError,
    InvalidParameterError,
    canonical_serialize,
    genesis_block,
    make_block,
    mainchain_of,
    pow_threshold,
    pow_valid,
)
from helpers import GOLDEN, mine_block


class TestCanonicalSerialize:
    def test_deterministic(self):
        g = genesis_block(GenesisConfig(chain_id=1, difficulty=1000))
        assert canonical_serialize(g) == canonical_serialize(g)

    def test_nonce_changes_bytes(self):
        a = make_block(1, ZERO_HASH, "m", 1, 10, 0)
        b = make_block(1, ZERO_HASH, "m", 2, 10, 0)
        assert canonical_serialize(a) != canonical_serialize(b)
        assert a.hash != b.hash

    def test_golden_genesis_bytes(self):
        # frozen wire-visible format; see tests/golden/
        g = genesis_block(GenesisConfig(chain_id=1, difficulty=1000))
        assert canonical_serialize(g) == (GOLDEN / "genesis_chain1_d1000.bin").read_bytes()
        assert g.hash.hex() == (GOLDEN / "genesis_chain1_d1000.hash").read_text().strip()

    def test_golden_block_bytes(self):
        raw = (GOLDEN / "block1_d1000.bin").read_bytes()
        want = (GOLDEN / "block1_d1000.hash").read_text().strip()
        import hashlib

        assert hashlib.sha256(raw).hexdigest() == want


class TestGenesis:
    def test_distinct_configs_distinct_hashes(self):
        base = genesis_block(GenesisConfig(chain_id=1, difficulty=1000))
        assert genesis_block(GenesisConfig(chain_id=2, difficulty=1000)).hash != base.hash
        assert genesis_block(GenesisConfig(chain_id=1, difficulty=1001)).hash != base.hash
        assert genesis_block(GenesisConfig(chain_id=1, difficulty=1000, extra=b"x")).hash != base.hash

    def test_difficulty_must_be_positive(self):
        with pytest.raises(InvalidParameterError):
            GenesisConfig(chain_id=1, difficulty=0)

    def test_genesis_shape(self):
        g = genesis_block(GenesisConfig(chain_id=1, difficulty=5))
        assert g.number == 0 and g.parent_hash == ZERO_HASH


class TestPowValid:
    def test_difficulty_one_accepts_everything(self):
        assert pow_threshold(1) == 1 << 256
        blk = make_block(1, ZERO_HASH, "m", 0, 1, 0)
        assert pow_valid(blk)

    def test_max_hash_invalid_at_difficulty_two(self):
        blk = Block(1, ZERO_HASH, "m", 0, 2, 0, b"\xff" * 32)
        assert not pow_valid(blk)

    def test_zero_difficulty_rejected(self):
        blk = Block(1, ZERO_HASH, "m", 0, 0, 0, b"\x00" * 32)
        with pytest.raises(InvalidParameterError):
            pow_valid(blk)

    def test_monte_carlo_acceptance_rate(self):
        # 99% CI for p = 1/1000 over 100000 draws is within [1/1300, 1/770]
        rng = random.Random(314159)
        trials = 100_000
        hits = 0
        for _ in range(trials):
            blk = make_block(1, ZERO_HASH, "mc", rng.getrandbits(64), 1000, 0)
            if pow_valid(blk):
                hits += 1
        rate = hits / trials
        assert 1 / 1300 <= rate <= 1 / 770


def _mined_chain(genesis, miners, difficulty=1):
    out = []
    cur = genesis
    for m in miners:
        cur = mine_block(cur, m, difficulty)
        out.append(cur)
    return out


class TestInsert:
    def setup_method(self):
        self.genesis = genesis_block(GenesisConfig(chain_id=9, difficulty=1, extra=b"ins"))

    def test_genesis_into_empty_store(self):
        store = ChainStore()
        report = store.insert(self.genesis)
        assert report.outcome is InsertOutcome.EXTENDS_HEAD
        assert store.head == self.genesis.hash

    def test_duplicate(self):
        store = ChainStore(self.genesis)
        assert store.insert(self.genesis).outcome is InsertOutcome.DUPLICATE

    def test_extends_head(self):
        store = ChainStore(self.genesis)
        blk = mine_block(self.genesis, "a")
        assert store.insert(blk).outcome is InsertOutcome.EXTENDS_HEAD
        assert store.head == blk.hash

    def test_equal_difficulty_tie_keeps_first_seen(self):
        store = ChainStore(self.genesis)
        chain_a = _mined_chain(self.genesis, ["a"] * 3)
        for blk in chain_a:
            store.insert(blk)
        # competing block at height 3 with equal total difficulty
        rival_parent = chain_a[1]
        rival = mine_block(rival_parent, "b")
        report = store.insert(rival)
        assert report.outcome is InsertOutcome.SIDE_CHAIN
        assert store.head == chain_a[-1].hash

    def test_reorg_to_heavier_chain(self):
        # chain A totals 3000 with two 1000-difficulty blocks over a
        # 1000-difficulty genesis; chain B overtakes at 4000
        genesis = genesis_block(GenesisConfig(chain_id=9, difficulty=1000))
        store = ChainStore(genesis)
        a1 = mine_block(genesis, "a", difficulty=1000)
        a2 = mine_block(a1, "a", difficulty=1000)
        store.insert(a1)
        store.insert(a2)
        assert store.total_difficulty[a2.hash] == 3000

        b1 = mine_block(genesis, "b", difficulty=1000, timestamp_ms=1)
        b2 = mine_block(b1, "b", difficulty=1000, timestamp_ms=1)
        b3 = mine_block(b2, "b", difficulty=1000, timestamp_ms=1)
        assert store.insert(b1).outcome is InsertOutcome.SIDE_CHAIN
        assert store.insert(b2).outcome is InsertOutcome.SIDE_CHAIN
        report = store.insert(b3)
        assert report.outcome is InsertOutcome.REORG
        move = report.accepted[0].head_move
        assert move.old_head == a2.hash and move.new_head == b3.hash
        assert move.reorg_depth == 2
        assert store.total_difficulty[b3.hash] == 4000

    def test_orphan_parked_then_adopted(self):
        store = ChainStore(self.genesis)
        b1 = mine_block(self.genesis, "a")
        b2 = mine_block(b1, "a")
        assert store.insert(b2).outcome is InsertOutcome.ORPHANED_PENDING
        assert store.has_pending(b2.hash)
        report = store.insert(b1)
        assert report.outcome is InsertOutcome.EXTENDS_HEAD
        assert [acc.block.hash for acc in report.accepted] == [b1.hash, b2.hash]
        assert store.head == b2.hash

    def test_orphan_duplicate_detected(self):
        store = ChainStore(self.genesis)
        b1 = mine_block(self.genesis, "a")
        b2 = mine_block(b1, "a")
        store.insert(b2)
        assert store.insert(b2).outcome is InsertOutcome.DUPLICATE

    def test_bad_pow_rejected(self):
        genesis = genesis_block(GenesisConfig(chain_id=9, difficulty=10**12))
        store = ChainStore(genesis)
        blk = make_block(1, genesis.hash, "a", 0, 10**12, 0)
        assert not pow_valid(blk)  # astronomically unlikely to pass
        with pytest.raises(InvalidBlockError):
            store.insert(blk)

    def test_tampered_hash_rejected(self):
        store = ChainStore(self.genesis)
        good = mine_block(self.genesis, "a")
        bad = Block(
            good.number, good.parent_hash, good.miner_id, good.nonce + 1,
            good.difficulty, good.timestamp_ms, good.hash,
        )
        with pytest.raises(InvalidBlockError):
            store.insert(bad)


class TestMainchain:
    def setup_method(self):
        self.genesis = genesis_block(GenesisConfig(chain_id=3, difficulty=1, extra=b"mc"))

    def test_genesis_only(self):
        store = ChainStore(self.genesis)
        assert mainchain_of(store) == [self.genesis]

    def test_linear_chain(self):
        store = ChainStore(self.genesis)
        chain = _mined_chain(self.genesis, ["a"] * 5)
        for blk in chain:
            store.insert(blk)
        assert mainchain_of(store) == [self.genesis] + chain

    def test_fork_excluded(self):
        # 6-block DAG: genesis - b1 - b2 - {b3a, b3b} with b3b extended
        store = ChainStore(self.genesis)
        b1 = mine_block(self.genesis, "a")
        b2 = mine_block(b1, "a")
        b3a = mine_block(b2, "a")
        b3b = mine_block(b2, "b", timestamp_ms=1)
        b4 = mine_block(b3b, "b", timestamp_ms=1)
        for blk in (b1, b2, b3a, b3b, b4):
            store.insert(blk)
        chain = mainchain_of(store)
        assert chain == [self.genesis, b1, b2, b3b, b4]
        assert b3a not in chain

    def test_empty_store_rejected(self):
        with pytest.raises(InvalidParameterError):
            mainchain_of(ChainStore())

    def test_consecutive_heights_and_links(self):
        store = ChainStore(self.genesis)
        for blk in _mined_chain(self.genesis, list("abcabc")):
            store.insert(blk)
        chain = mainchain_of(store)
        for prev, cur in zip(chain, chain[1:]):
            assert cur.number == prev.number + 1
            assert cur.parent_hash == prev.hash


class TestProperties:
    def test_total_difficulty_strictly_increasing(self):
        genesis = genesis_block(GenesisConfig(chain_id=5, difficulty=3))
        store = ChainStore(genesis)
        cur = genesis
        for i in range(8):
            cur = mine_block(cur, "m", difficulty=3 + i)
            store.insert(cur)
        chain = mainchain_of(store)
        tds = [store.total_difficulty[b.hash] for b in chain]
        assert all(a < b for a, b in zip(tds, tds[1:]))

    @settings(max_examples=30, deadline=None)
    @given(st.randoms(use_true_random=False), st.integers(2, 20))
    def test_insertion_order_invariance(self, pyrandom, n_blocks):
        # random tree with per-block difficulties making total difficulties
        # distinct in practice; any arrival order gives the same head
        genesis = genesis_block(GenesisConfig(chain_id=4, difficulty=1, extra=b"perm"))
        blocks = [genesis]
        rng = random.Random(pyrandom.getrandbits(32))
        for i in range(n_blocks):
            parent = rng.choice(blocks)
            blocks.append(mine_block(parent, f"m{i}", difficulty=rng.randrange(1, 50)))

        def final_state(order):
            store = ChainStore(genesis)
            for blk in order:
                store.insert(blk)
            return store.head, [b.hash for b in mainchain_of(store)]

        body = blocks[1:]
        baseline = final_state(body)
        tds = {}
        for blk in body:
            tds[blk.hash] = tds.get(blk.parent_hash, 0) + blk.difficulty
        unique_max = list(tds.values()).count(max(tds.values())) == 1
        for _ in range(4):
            shuffled = body[:]
            rng.shuffle(shuffled)
            state = final_state(shuffled)
            if unique_max:
                assert state == baseline
