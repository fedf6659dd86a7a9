"""Real byte-stream transport: one OS process per node on localhost.

Each node process runs the same Node state machine as the simulator, fed
by socket reader threads that funnel everything into one inbound queue.
The fleet driver plays master server: it spawns the processes, wires the
command channels, polls status, enforces the stop condition and gathers
the event logs.
"""

from __future__ import annotations

import logging
import os
import queue
import random
import socket
import struct
import subprocess
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import events, wire
from .chain import GenesisConfig
from .config import ExperimentConfig
from .events import NodeEvent, parse_log
from .node import Candidate, Node, NodeConfig, search_nonces

log = logging.getLogger(__name__)

CONNECT_TIMEOUT_S = 5.0
DIAL_BACKOFF_START_S = 1.0
DIAL_BACKOFF_CAP_S = 30.0
QUIESCENCE_WINDOW_S = 2.0
MINE_BATCH = 512


class FramedConn:
    """Thread-safe framed messages over one TCP connection."""

    def __init__(self, sock: socket.socket):
        self.sock = sock
        self._wlock = threading.Lock()

    def send(self, message: wire.Message | wire.Command) -> None:
        data = wire.encode(message)
        with self._wlock:
            self.sock.sendall(data)

    def recv(self) -> Optional[wire.Message | wire.Command]:
        header = self._read_exact(4)
        if header is None:
            return None
        (length,) = struct.unpack(">I", header)
        if length > wire.MAX_FRAME_BYTES:
            raise wire.OversizeError("frame exceeds 16 MiB cap")
        payload = self._read_exact(length)
        if payload is None:
            raise wire.FramingError("connection closed mid-frame")
        return wire.decode_payload(payload)

    def _read_exact(self, n: int) -> Optional[bytes]:
        buf = b""
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except OSError:
                return None
            if not chunk:
                return None
            buf += chunk
        return buf

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class RealRuntime:
    """Sockets-and-threads runtime backing one node process."""

    def __init__(self, config: NodeConfig, listen_port: int, command_port: int,
                 dial: list[str], log_path: Path):
        self.config = config
        self.listen_port = listen_port
        self.command_port = command_port
        self.dial = dial
        self.inbox: queue.Queue = queue.Queue()
        self.peers: dict[str, FramedConn] = {}
        self._peers_lock = threading.Lock()
        self._command_conn: Optional[FramedConn] = None
        self._log_file = open(log_path, "w", encoding="utf-8")
        self._running = True
        self._rng = random.Random()  # real mode is wall-clock nondeterministic anyway
        self._t0 = time.monotonic()
        self._status: Optional[wire.Status] = None  # refreshed by the loop for handshakes
        self.node: Optional[Node] = None
        self._candidate: Optional[Candidate] = None
        self._nonce = 0
        self._mine_budget = 0.0
        self._last_mine = time.monotonic()
        self._threads: list[threading.Thread] = []

    # ------------------------------------------------------------ Runtime API

    def now_ms(self) -> float:
        return (time.monotonic() - self._t0) * 1000.0

    def send(self, peer_id: str, message: wire.Message) -> None:
        with self._peers_lock:
            conn = self.peers.get(peer_id)
        if conn is None:
            return
        try:
            conn.send(message)
        except OSError:
            self.inbox.put(("peer_down", peer_id))

    def emit(self, event: NodeEvent) -> None:
        self._log_file.write(events.to_json_line(event) + "\n")
        self._log_file.flush()

    def set_candidate(self, candidate: Optional[Candidate]) -> None:
        self._candidate = candidate
        self._nonce = self._rng.getrandbits(64)

    def send_control(self, message: wire.Message) -> None:
        conn = self._command_conn
        if conn is not None:
            try:
                conn.send(message)
            except OSError:
                pass

    def shutdown(self) -> None:
        self._running = False

    # ------------------------------------------------------------ wiring

    def start(self, node: Node) -> None:
        self.node = node
        self._status = node.status_message()
        self._spawn(self._peer_listener, name="peer-listener")
        self._spawn(self._command_listener, name="command-listener")
        for addr in self.dial:
            self._spawn(self._dialer, args=(addr,), name=f"dial-{addr}")

    def _spawn(self, target, args=(), name="") -> None:
        t = threading.Thread(target=target, args=args, name=name, daemon=True)
        t.start()
        self._threads.append(t)

    def _peer_listener(self) -> None:
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind(("127.0.0.1", self.listen_port))
        srv.listen(16)
        srv.settimeout(0.5)
        while self._running:
            try:
                sock, _ = srv.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            self._spawn(self._handshake, args=(FramedConn(sock), False), name="accept")
        srv.close()

    def _dialer(self, addr: str) -> None:
        host, port = addr.rsplit(":", 1)
        backoff = DIAL_BACKOFF_START_S
        while self._running:
            try:
                sock = socket.create_connection((host, int(port)), timeout=CONNECT_TIMEOUT_S)
                self._handshake(FramedConn(sock), True)
                return
            except OSError as exc:
                log.info("%s: dial %s failed (%s); retrying in %.1fs",
                         self.config.node_id, addr, exc, backoff)
                time.sleep(backoff)
                backoff = min(backoff * 2, DIAL_BACKOFF_CAP_S)

    def _handshake(self, conn: FramedConn, we_dialed: bool) -> None:
        """Mutual Status exchange; dialer speaks first."""
        try:
            if we_dialed:
                conn.send(self._status)
                first = conn.recv()
            else:
                first = conn.recv()
                conn.send(self._status)
        except (OSError, ValueError) as exc:
            log.warning("%s: handshake failed: %s", self.config.node_id, exc)
            conn.close()
            return
        if not isinstance(first, wire.Status):
            log.warning("%s: handshake got %r", self.config.node_id, type(first).__name__)
            conn.close()
            return
        genesis = self.node.genesis
        if first.chain_id != self.config.genesis.chain_id or first.genesis_hash != genesis.hash:
            log.error("%s: incompatible peer %s (another chain); fatal",
                      self.config.node_id, first.node_id)
            conn.close()
            self.inbox.put(("fatal", "genesis mismatch"))
            return
        peer_id = first.node_id
        with self._peers_lock:
            stale = self.peers.pop(peer_id, None)
            self.peers[peer_id] = conn
        if stale is not None:
            stale.close()
        self.inbox.put(("msg", peer_id, first))
        self._spawn(self._peer_reader, args=(peer_id, conn), name=f"read-{peer_id}")

    def _peer_reader(self, peer_id: str, conn: FramedConn) -> None:
        while self._running:
            try:
                msg = conn.recv()
            except ValueError as exc:
                log.warning("%s: protocol error from %s: %s", self.config.node_id, peer_id, exc)
                msg = None
            if msg is None:
                break
            self.inbox.put(("msg", peer_id, msg))
        self.inbox.put(("peer_down", peer_id))

    def _command_listener(self) -> None:
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind(("127.0.0.1", self.command_port))
        srv.listen(4)
        srv.settimeout(0.5)
        while self._running:
            try:
                sock, _ = srv.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            conn = FramedConn(sock)
            self._command_conn = conn
            while self._running:
                try:
                    msg = conn.recv()
                except ValueError:
                    break
                if msg is None:
                    break
                self.inbox.put(("cmd", msg))
        srv.close()

    # ------------------------------------------------------------ event loop

    def run(self) -> None:
        """Single-threaded node loop: queue items, then a mining batch."""
        node = self.node
        rate = self.config.hashrate_limit
        while self._running:
            try:
                item = self.inbox.get(timeout=0.002 if self._candidate else 0.05)
            except queue.Empty:
                item = None
            if item is not None:
                kind = item[0]
                if kind == "msg":
                    _, peer_id, msg = item
                    try:
                        node.on_message(peer_id, msg)
                    except Exception:
                        log.exception("%s: handler error", self.config.node_id)
                elif kind == "cmd":
                    node.on_command(item[1])
                elif kind == "peer_down":
                    with self._peers_lock:
                        conn = self.peers.pop(item[1], None)
                    if conn is not None:
                        conn.close()
                        node.on_peer_disconnected(item[1])
                elif kind == "fatal":
                    log.error("%s: fatal: %s", self.config.node_id, item[1])
                    self._running = False
                self._status = node.status_message()
                continue
            self._mine_slice(rate)
        self._close_all()

    def _mine_slice(self, rate: Optional[float]) -> None:
        candidate = self._candidate
        now = time.monotonic()
        if candidate is None:
            self._last_mine = now
            return
        if rate is None:
            batch = MINE_BATCH
        else:
            self._mine_budget = min(self._mine_budget + (now - self._last_mine) * rate, rate)
            self._last_mine = now
            batch = int(self._mine_budget)
            if batch < 1:
                return
            batch = min(batch, MINE_BATCH)
            self._mine_budget -= batch
        timestamp_ms = int(self.now_ms())  # must match the searched bytes exactly
        found = search_nonces(candidate, timestamp_ms, self._nonce, max_attempts=batch)
        if found is None:
            self._nonce = (self._nonce + batch) & (2**64 - 1)
            return
        nonce, _ = found
        from .chain import make_block

        block = make_block(candidate.number, candidate.parent_hash, candidate.miner_id,
                           nonce, candidate.difficulty, timestamp_ms)
        self.node.on_block_found(block)
        self._status = self.node.status_message()

    def _close_all(self) -> None:
        with self._peers_lock:
            conns = list(self.peers.values())
            self.peers.clear()
        for conn in conns:
            conn.close()
        if self._command_conn is not None:
            self._command_conn.close()
        self._log_file.flush()
        self._log_file.close()


def run_node(config: NodeConfig, listen_port: int, command_port: int,
             dial: list[str], log_path: str | Path) -> None:
    """Process main for one real node: wires sockets, loops until Shutdown."""
    runtime = RealRuntime(config, listen_port, command_port, dial, Path(log_path))
    node = Node(config, runtime)
    runtime.start(node)
    node.start()
    runtime.run()


# ----------------------------------------------------------------------
# fleet driver (the master-server side)


def free_ports(count: int) -> list[int]:
    socks = []
    for _ in range(count):
        s = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        s.bind(("127.0.0.1", 0))
        socks.append(s)
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


@dataclass
class FleetResult:
    logs: dict[str, list[NodeEvent]]
    aborted: bool = False


@dataclass
class _NodeHandle:
    node_id: str
    peer_port: int
    command_port: int
    log_path: Path
    process: Optional[subprocess.Popen] = None
    conn: Optional[FramedConn] = None
    status: Optional[wire.Status] = None
    last_two: tuple = ()
    lock: threading.Lock = field(default_factory=threading.Lock)


class MultiprocessFleet:
    """Spawns one subprocess per node and orchestrates the run."""

    def __init__(self, config: ExperimentConfig, run_dir: Optional[Path] = None):
        self.config = config
        self.run_dir = Path(run_dir) if run_dir else Path(
            os.environ.get("BLOCKBOX_RUN_DIR", "/tmp")) / f"blockbox-{os.getpid()}-{id(self):x}"
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self._stop_requested = False
        ports = free_ports(2 * config.n)
        self.handles = {
            node_id: _NodeHandle(
                node_id=node_id,
                peer_port=ports[2 * i],
                command_port=ports[2 * i + 1],
                log_path=self.run_dir / f"{node_id}.jsonl",
            )
            for i, node_id in enumerate(config.node_ids())
        }

    def request_stop(self) -> None:
        self._stop_requested = True

    def _spawn_all(self) -> None:
        genesis = self.config.genesis
        adjacency = self.config.topology.neighbors()
        for i, (node_id, handle) in enumerate(self.handles.items()):
            # lower-indexed edge end listens, higher dials: every edge one connection
            dial = [
                f"127.0.0.1:{self.handles[f'n{j}'].peer_port}"
                for j in adjacency[i]
                if j < i
            ]
            argv = [
                sys.executable, "-m", "blockbox", "node",
                "--node-id", node_id,
                "--chain-id", str(genesis.chain_id),
                "--difficulty", str(genesis.difficulty),
                "--extra-hex", genesis.extra.hex(),
                "--listen-port", str(handle.peer_port),
                "--command-port", str(handle.command_port),
                "--log", str(handle.log_path),
                "--hashrate", str(self.config.hashrate),
            ]
            if dial:
                argv += ["--dial", ",".join(dial)]
            handle.process = subprocess.Popen(
                argv, stdout=subprocess.DEVNULL, stderr=subprocess.STDOUT
            )

    def _connect_commands(self, timeout_s: float = 15.0) -> None:
        deadline = time.monotonic() + timeout_s
        for handle in self.handles.values():
            while True:
                try:
                    sock = socket.create_connection(("127.0.0.1", handle.command_port), timeout=1.0)
                    handle.conn = FramedConn(sock)
                    break
                except OSError:
                    if time.monotonic() > deadline:
                        raise RuntimeError(f"{handle.node_id}: command channel never came up")
                    time.sleep(0.1)
            t = threading.Thread(target=self._command_reader, args=(handle,), daemon=True)
            t.start()

    def _command_reader(self, handle: _NodeHandle) -> None:
        while True:
            try:
                msg = handle.conn.recv()
            except ValueError:
                break
            if msg is None:
                break
            with handle.lock:
                if isinstance(msg, wire.Status):
                    handle.status = msg
                elif isinstance(msg, wire.Blocks):
                    handle.last_two = msg.blocks

    def _broadcast(self, command: wire.Command) -> None:
        for handle in self.handles.values():
            if handle.conn is not None:
                try:
                    handle.conn.send(command)
                except OSError:
                    pass

    def _snapshot(self, run_id: str, status: str) -> dict:
        from .orchestrator import color_of

        nodes = []
        heads = set()
        for node_id in sorted(self.handles):
            handle = self.handles[node_id]
            with handle.lock:
                st, tiles = handle.status, handle.last_two
            if st is None:
                nodes.append({"node_id": node_id, "head_hash": None, "head_number": 0,
                              "sync_state": "starting", "peer_count": 0, "last_two": []})
                continue
            heads.add(st.head_hash)
            nodes.append({
                "node_id": node_id,
                "head_hash": st.head_hash.hex(),
                "head_number": st.head_number,
                "sync_state": "live",
                "peer_count": 0,
                "last_two": [
                    {"number": b.number, "hash": b.hash.hex(), "color": color_of(b.hash)}
                    for b in tiles
                ],
            })
        return {"run_id": run_id, "status": status, "t_ms": int(time.monotonic() * 1000),
                "nodes": nodes, "consensus": len(heads) == 1 and bool(heads)}

    def run(self, publish=None, run_id: str = "mp") -> FleetResult:
        aborted = False
        try:
            self._spawn_all()
            self._connect_commands()
            self._broadcast(wire.StartMining())
            started = time.monotonic()
            stop = self.config.stop
            while not self._stop_requested:
                self._broadcast(wire.ReportStatus())
                time.sleep(0.25)
                if publish is not None:
                    publish(self._snapshot(run_id, "running"))
                heights = [h.status.head_number for h in self.handles.values() if h.status]
                if stop.height is not None and heights and max(heights) >= stop.height:
                    break
                if stop.duration_ms is not None and (time.monotonic() - started) * 1000 >= stop.duration_ms:
                    break
            aborted = self._stop_requested
            self._broadcast(wire.StopMining())
            self._await_quiescence()
        finally:
            self._broadcast(wire.Shutdown())
            self._reap()
        logs = {}
        for node_id, handle in sorted(self.handles.items()):
            if handle.log_path.exists():
                logs[node_id] = parse_log(handle.log_path.read_text())
            else:
                logs[node_id] = []
        if publish is not None:
            publish(self._snapshot(run_id, "aborted" if aborted else "completed"))
        return FleetResult(logs=logs, aborted=aborted)

    def _await_quiescence(self, timeout_s: float = 30.0) -> None:
        """Wait until no node's head moves for the quiescence window."""
        deadline = time.monotonic() + timeout_s
        last_heads: dict[str, bytes] = {}
        stable_since = time.monotonic()
        while time.monotonic() < deadline:
            self._broadcast(wire.ReportStatus())
            time.sleep(0.2)
            heads = {}
            for node_id, handle in self.handles.items():
                with handle.lock:
                    if handle.status is not None:
                        heads[node_id] = handle.status.head_hash
            if heads != last_heads:
                last_heads = heads
                stable_since = time.monotonic()
            elif time.monotonic() - stable_since >= QUIESCENCE_WINDOW_S:
                return
        log.warning("quiescence timeout; proceeding with current logs")

    def _reap(self) -> None:
        for handle in self.handles.values():
            if handle.conn is not None:
                handle.conn.close()
            proc = handle.process
            if proc is None:
                continue
            try:
                proc.wait(timeout=5.0)
            except subprocess.TimeoutExpired:
                proc.kill()
                proc.wait(timeout=5.0)
