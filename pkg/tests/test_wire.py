import json
import random

import pytest

from blockbox import wire
from blockbox.chain import make_block, pow_valid
from helpers import GOLDEN, GENESIS, chain_of


def random_block(rng, max_number=2**20):
    # arbitrary field soup; wire blocks need not be PoW-valid
    return make_block(
        number=rng.randrange(1, max_number),
        parent_hash=rng.getrandbits(256).to_bytes(32, "big"),
        miner_id=f"node-{rng.randrange(100)}",
        nonce=rng.getrandbits(64),
        difficulty=rng.randrange(1, 2**40),
        timestamp_ms=rng.randrange(2**40),
    )


def random_message(rng) -> wire.Message:
    kind = rng.randrange(8)
    if kind == 0:
        return wire.Status(
            node_id=f"n{rng.randrange(1000)}",
            chain_id=rng.getrandbits(32),
            genesis_hash=rng.getrandbits(256).to_bytes(32, "big"),
            head_hash=rng.getrandbits(256).to_bytes(32, "big"),
            head_number=rng.getrandbits(32),
            total_difficulty=rng.getrandbits(48),
        )
    if kind == 1:
        return wire.NewBlock(random_block(rng))
    if kind == 2:
        return wire.GetBlocks(rng.getrandbits(32), rng.randrange(1, 513))
    if kind == 3:
        blocks = chain_of(GENESIS, [f"m{i}" for i in range(rng.randrange(0, 6))])
        return wire.Blocks(tuple(blocks))
    return [wire.Ping(), wire.Pong(), wire.StartMining(), wire.StopMining()][kind - 4]


class TestRoundTrip:
    def test_ping_pong(self):
        assert wire.decode(wire.encode(wire.Ping())) == wire.Ping()
        assert wire.decode(wire.encode(wire.Pong())) == wire.Pong()

    def test_status_all_zero_hashes(self):
        msg = wire.Status("n0", 0, b"\x00" * 32, b"\x00" * 32, 0, 0)
        assert wire.decode(wire.encode(msg)) == msg

    def test_new_block_recomputes_hash(self):
        blk = chain_of(GENESIS, ["a"])[0]
        out = wire.decode(wire.encode(wire.NewBlock(blk)))
        assert out.block == blk
        assert pow_valid(out.block)

    def test_commands(self):
        for cmd in (wire.StartMining(), wire.StopMining(), wire.Shutdown(), wire.ReportStatus()):
            assert wire.decode(wire.encode(cmd)) == cmd

    def test_randomized_messages(self):
        rng = random.Random(777)
        for _ in range(1000):
            msg = random_message(rng)
            assert wire.decode(wire.encode(msg)) == msg


class TestGoldenFrames:
    def test_decode_committed_frames(self):
        frames = json.loads((GOLDEN / "frames.json").read_text())
        for name, hexframe in frames.items():
            msg = wire.decode(bytes.fromhex(hexframe))
            assert wire.encode(msg).hex() == hexframe, name


class TestErrors:
    def test_truncated_frame(self):
        frame = wire.encode(wire.GetBlocks(1, 10))
        with pytest.raises(wire.FramingError):
            wire.decode(frame[:-1])
        with pytest.raises(wire.FramingError):
            wire.decode(frame[:3])

    def test_unknown_tag(self):
        with pytest.raises(wire.ProtocolError):
            wire.decode(b"\x00\x00\x00\x01\x7f")

    def test_oversize(self):
        huge = (wire.MAX_FRAME_BYTES + 1).to_bytes(4, "big") + b"x"
        with pytest.raises(wire.OversizeError):
            wire.decode(huge)
        with pytest.raises(wire.OversizeError):
            wire.FrameDecoder().feed(huge)

    def test_get_blocks_count_bounds(self):
        for bad in (0, 513):
            with pytest.raises(wire.ProtocolError):
                wire.encode(wire.GetBlocks(0, bad))

    def test_blocks_must_ascend_and_link(self):
        b1, b2 = chain_of(GENESIS, ["a", "a"])
        with pytest.raises(wire.ProtocolError):
            wire.encode(wire.Blocks((b2, b1)))
        stranger = make_block(b2.number, b"\xaa" * 32, "x", 0, 1, 0)
        with pytest.raises(wire.ProtocolError):
            wire.encode(wire.Blocks((b1, stranger)))

    def test_trailing_bytes_rejected(self):
        payload = wire.encode(wire.Ping())[4:] + b"\x00"
        frame = len(payload).to_bytes(4, "big") + payload
        with pytest.raises(wire.ProtocolError):
            wire.decode(frame)


class TestFrameDecoder:
    def test_incremental_feed(self):
        msgs = [wire.Ping(), wire.GetBlocks(5, 7), wire.Pong()]
        stream = b"".join(wire.encode(m) for m in msgs)
        dec = wire.FrameDecoder()
        got = []
        for i in range(0, len(stream), 3):
            got.extend(dec.feed(stream[i : i + 3]))
        assert got == msgs

    def test_partial_then_complete(self):
        frame = wire.encode(wire.Ping())
        dec = wire.FrameDecoder()
        assert dec.feed(frame[:2]) == []
        assert dec.feed(frame[2:]) == [wire.Ping()]


class TestLatencyModel:
    def test_deterministic_per_index(self):
        lat = wire.LatencyModel(base_ms=10, jitter_ms=20, seed=99)
        draws = [lat.delay_ms("a", "b", i) for i in range(50)]
        again = [lat.delay_ms("a", "b", i) for i in range(50)]
        assert draws == again
        assert draws != [lat.delay_ms("b", "a", i) for i in range(50)]

    def test_zero_jitter_exact_base(self):
        lat = wire.LatencyModel(base_ms=50, jitter_ms=0, seed=1)
        assert all(lat.delay_ms("x", "y", i) == 50 for i in range(100))

    def test_bounds(self):
        lat = wire.LatencyModel(base_ms=5, jitter_ms=10, seed=3)
        for i in range(1000):
            d = lat.delay_ms("a", "b", i)
            assert 5 <= d < 15

    def test_uniformity_chi_square(self):
        # 10000 draws, 20 bins; chi-square critical value at 1% for 19 df
        from scipy.stats import chi2

        lat = wire.LatencyModel(base_ms=0, jitter_ms=1, seed=42)
        bins = [0] * 20
        n = 10_000
        for i in range(n):
            u = lat.delay_ms("src", "dst", i)
            bins[min(int(u * 20), 19)] += 1
        expected = n / 20
        stat = sum((c - expected) ** 2 / expected for c in bins)
        assert stat < chi2.ppf(0.99, df=19)

    def test_negative_params_rejected(self):
        with pytest.raises(ValueError):
            wire.LatencyModel(base_ms=-1)
