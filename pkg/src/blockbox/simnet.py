"""Deterministic in-process network: discrete-event scheduler, simulated
transport with seeded latency, and a mining engine that places block
finds on the simulated clock.

Two runs with the same configuration and seed execute the identical event
sequence and therefore produce byte-identical logs.
"""

from __future__ import annotations

import hashlib
import heapq
import math
import random
from dataclasses import dataclass
from typing import Callable, Optional

from . import wire
from .chain import Block, make_block
from .config import MODE_SIMULATED, ExperimentConfig
from .events import NodeEvent
from .node import Candidate, Node, NodeConfig, search_nonces


def derive_seed(master: int, *labels) -> int:
    """Stable sub-seed from a master seed and a label path."""
    key = "|".join([str(master), *map(str, labels)]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def geometric(rng: random.Random, p: float) -> int:
    """Number of Bernoulli(p) attempts up to and including the first success."""
    if p >= 1.0:
        return 1
    u = rng.random()
    return int(math.log(1.0 - u) / math.log1p(-p)) + 1


class Handle:
    __slots__ = ("cancelled",)

    def __init__(self) -> None:
        self.cancelled = False

    def cancel(self) -> None:
        self.cancelled = True


class Scheduler:
    """Time-ordered callback queue; ties run in scheduling order."""

    def __init__(self) -> None:
        self.now = 0.0
        self._heap: list[tuple[float, int, Handle, Callable[[], None]]] = []
        self._seq = 0

    def schedule(self, delay_ms: float, fn: Callable[[], None]) -> Handle:
        handle = Handle()
        self._seq += 1
        heapq.heappush(self._heap, (self.now + max(delay_ms, 0.0), self._seq, handle, fn))
        return handle

    def run_one(self) -> bool:
        while self._heap:
            t, _, handle, fn = heapq.heappop(self._heap)
            if handle.cancelled:
                continue
            self.now = t
            fn()
            return True
        return False


class _Link:
    __slots__ = ("index", "last_delivery")

    def __init__(self) -> None:
        self.index = 0
        self.last_delivery = 0.0


class SimTransport:
    """Reliable ordered links with seeded per-message latency.

    Messages are serialized through the real wire codec on every hop, so
    the simulation exercises exactly the bytes a TCP run would. Delivery
    per ordered pair is clamped to FIFO even under jitter.
    """

    def __init__(self, sched: Scheduler, latency: wire.LatencyModel):
        self.sched = sched
        self.latency = latency
        self.endpoints: dict[str, object] = {}
        self.links: dict[tuple[str, str], _Link] = {}

    def register(self, node_id: str, endpoint) -> None:
        self.endpoints[node_id] = endpoint

    def connect(self, a: str, b: str) -> None:
        self.links[(a, b)] = _Link()
        self.links[(b, a)] = _Link()
        self.endpoints[a].on_peer_link(b)
        self.endpoints[b].on_peer_link(a)

    def disconnect(self, a: str, b: str) -> None:
        self.links.pop((a, b), None)
        self.links.pop((b, a), None)
        self.endpoints[a].on_peer_disconnected(b)
        self.endpoints[b].on_peer_disconnected(a)

    def send(self, src: str, dst: str, message: wire.Message) -> None:
        link = self.links.get((src, dst))
        if link is None:
            raise RuntimeError(f"{src} -> {dst}: not adjacent in the wired topology")
        frame = wire.encode(message)
        delay = self.latency.delay_ms(src, dst, link.index)
        link.index += 1
        at = max(self.sched.now + delay, link.last_delivery)
        link.last_delivery = at
        self.sched.schedule(at - self.sched.now, lambda: self._deliver(src, dst, frame))

    def _deliver(self, src: str, dst: str, frame: bytes) -> None:
        endpoint = self.endpoints.get(dst)
        if endpoint is not None and (src, dst) in self.links:
            endpoint.on_message(src, wire.decode(frame))


class GeometricMiner:
    """Schedules the next block find from the per-attempt success law.

    The wait until success is drawn geometrically with p = 1/difficulty at
    the node's attempt rate; an abandoned candidate costs nothing and a
    fresh draw is statistically identical (memorylessness). When the find
    fires, a real nonce search produces a block that genuinely clears the
    proof-of-work threshold.
    """

    def __init__(
        self,
        sched: Scheduler,
        rng: random.Random,
        attempts_per_sec: float,
        on_found: Callable[[Block], None],
    ):
        self.sched = sched
        self.rng = rng
        self.rate = attempts_per_sec
        self.on_found = on_found
        self._pending: Optional[Handle] = None
        self.candidate: Optional[Candidate] = None

    def set_candidate(self, candidate: Optional[Candidate]) -> None:
        if self._pending is not None:
            self._pending.cancel()
            self._pending = None
        self.candidate = candidate
        if candidate is None:
            return
        attempts = geometric(self.rng, 1.0 / candidate.difficulty)
        delay_ms = attempts * 1000.0 / self.rate
        self._pending = self.sched.schedule(delay_ms, self._fire)

    def _fire(self) -> None:
        candidate = self.candidate
        self._pending = None
        if candidate is None:
            return
        timestamp_ms = int(self.sched.now)
        found = search_nonces(candidate, timestamp_ms, self.rng.getrandbits(64))
        assert found is not None  # unbounded search always returns
        nonce, _ = found
        block = make_block(
            candidate.number,
            candidate.parent_hash,
            candidate.miner_id,
            nonce,
            candidate.difficulty,
            timestamp_ms,
        )
        self.on_found(block)


class SimRuntime:
    """Runtime facade handed to a Node inside the simulator."""

    def __init__(self, sim: "Simulation", node_id: str):
        self.sim = sim
        self.node_id = node_id

    def now_ms(self) -> float:
        return self.sim.sched.now

    def send(self, peer_id: str, message: wire.Message) -> None:
        self.sim.transport.send(self.node_id, peer_id, message)

    def emit(self, event: NodeEvent) -> None:
        self.sim.logs[self.node_id].append(event)

    def set_candidate(self, candidate: Optional[Candidate]) -> None:
        self.sim.miners[self.node_id].set_candidate(candidate)

    def send_control(self, message: wire.Message) -> None:
        self.sim.control_replies.append((self.node_id, message))

    def shutdown(self) -> None:
        pass  # node.stopped gates all further work


@dataclass
class SimResult:
    config: ExperimentConfig
    logs: dict[str, list[NodeEvent]]
    sim_time_ms: float
    stopped_at_height: int
    aborted: bool = False


class Simulation:
    """N nodes wired per the topology, driven to a stop condition."""

    def __init__(self, config: ExperimentConfig):
        if config.mode != MODE_SIMULATED:
            raise ValueError("Simulation requires simulated mode")
        problems = config.problems()
        if problems:
            raise ValueError("invalid config: " + "; ".join(problems))
        self.config = config
        self.sched = Scheduler()
        latency = config.latency
        if latency.seed == 0:
            latency = wire.LatencyModel(latency.base_ms, latency.jitter_ms, derive_seed(config.seed, "net"))
        self.transport = SimTransport(self.sched, latency)
        self.logs: dict[str, list[NodeEvent]] = {}
        self.nodes: dict[str, Node] = {}
        self.miners: dict[str, GeometricMiner] = {}
        self.control_replies: list[tuple[str, wire.Message]] = []
        self.abort = False

        adjacency = config.topology.neighbors()
        for i, node_id in enumerate(config.node_ids()):
            peers = tuple(f"n{j}" for j in adjacency[i])
            node_config = NodeConfig(
                node_id=node_id,
                genesis=config.genesis,
                peers=peers,
                hashrate_limit=config.hashrate,
            )
            runtime = SimRuntime(self, node_id)
            node = Node(node_config, runtime)
            rng = random.Random(derive_seed(config.seed, "mine", node_id))
            self.logs[node_id] = []
            self.nodes[node_id] = node
            self.miners[node_id] = GeometricMiner(
                self.sched, rng, config.hashrate, node.on_block_found
            )
            self.transport.register(node_id, node)

        for node_id in config.node_ids():
            self.nodes[node_id].start()
        for a, b in config.topology.edges:
            self.transport.connect(f"n{a}", f"n{b}")

    def broadcast(self, command: wire.Command) -> None:
        for node_id in sorted(self.nodes):
            self.nodes[node_id].on_command(command)

    def max_height(self) -> int:
        return max(node.store.height for node in self.nodes.values())

    def heads(self) -> dict[str, bytes]:
        return {node_id: node.store.head for node_id, node in sorted(self.nodes.items())}

    def run(self, after_event: Optional[Callable[["Simulation"], None]] = None) -> SimResult:
        """Drive to the stop condition, then drain to quiescence.

        after_event, when given, runs after every processed event; the
        orchestrator uses it for status publishing, pacing and aborts.
        """
        stop = self.config.stop
        mining_stopped = False
        self.broadcast(wire.StartMining())
        if stop.duration_ms is not None:
            def stop_mining() -> None:
                nonlocal mining_stopped
                if not mining_stopped:
                    mining_stopped = True
                    self.broadcast(wire.StopMining())

            self.sched.schedule(stop.duration_ms, stop_mining)

        while self.sched.run_one():
            if after_event is not None:
                after_event(self)
            if self.abort:
                return SimResult(
                    self.config, self.logs, self.sched.now, self.max_height(), aborted=True
                )
            if (
                not mining_stopped
                and stop.height is not None
                and self.max_height() >= stop.height
            ):
                mining_stopped = True
                self.broadcast(wire.StopMining())
        # queue empty: no in-flight messages, all heads final (quiescence)
        return SimResult(self.config, self.logs, self.sched.now, self.max_height())
