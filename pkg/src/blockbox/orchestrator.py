"""Master-server logic: launches a network per config, runs it to the stop
condition, gathers logs, computes metrics, and serves status snapshots.

Two run modes: in-process simulated (deterministic; the acceptance suite
runs here) and multiprocess-on-localhost (real sockets, nondeterministic,
closest to a physical fleet).
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .chain import InvalidParameterError
from .config import (
    MODE_MULTIPROCESS,
    MODE_SIMULATED,
    ExperimentConfig,
    calibrate_difficulty,
)
from .events import NodeEvent, dump_log, parse_log
from .metrics import MetricsReport, compute_metrics
from .node import Candidate, NodeConfig, search_nonces
from .simnet import Simulation

__all__ = [
    "Orchestrator",
    "RunRecord",
    "calibrate_difficulty",
    "measure_hashrate",
    "color_of",
    "load_run_dir",
    "export_result",
]

log = logging.getLogger(__name__)

STATUS_RUNNING = "running"
STATUS_COMPLETED = "completed"
STATUS_ABORTED = "aborted"

SNAPSHOT_INTERVAL_S = 0.25  # published at 4 Hz while a run is live


class RunNotFound(KeyError):
    pass


def color_of(h: bytes) -> str:
    """Tile color shared with the control panel: first 3 hash bytes as RGB."""
    return "#" + h[:3].hex()


def measure_hashrate(node: NodeConfig, duration_s: float) -> float:
    """Attempts per second a node can sustain, probed at difficulty 2^32.

    A configured hashrate limit is authoritative (the simulator enforces
    it exactly); otherwise a timed local nonce scan measures the host.
    """
    if duration_s < 1.0:
        raise InvalidParameterError("measurement duration must be at least 1 s")
    if node.hashrate_limit is not None:
        return float(node.hashrate_limit)
    candidate = Candidate(
        number=1, parent_hash=b"\x55" * 32, miner_id=node.node_id, difficulty=2**32
    )
    attempts = 0
    start = time.perf_counter()
    deadline = start + duration_s
    while time.perf_counter() < deadline:
        found = search_nonces(candidate, 0, attempts, max_attempts=20000)
        if found is not None:  # astronomically unlikely at 2^32; count it anyway
            attempts += found[1]
        else:
            attempts += 20000
    return attempts / (time.perf_counter() - start)


@dataclass
class RunRecord:
    run_id: str
    config: ExperimentConfig
    status: str = STATUS_RUNNING
    logs: Optional[dict[str, list[NodeEvent]]] = None
    metrics: Optional[MetricsReport] = None
    started_at: float = field(default_factory=time.time)
    finished_at: Optional[float] = None
    sim_time_ms: Optional[float] = None
    error: Optional[str] = None


class _Run:
    def __init__(self, record: RunRecord):
        self.record = record
        self.lock = threading.Lock()
        self.snapshot: dict = {
            "run_id": record.run_id,
            "status": record.status,
            "t_ms": 0,
            "nodes": [],
            "consensus": False,
        }
        self.abort_requested = False
        self.thread: Optional[threading.Thread] = None
        self.driver = None  # multiprocess fleet handle

    def publish(self, snapshot: dict) -> None:
        with self.lock:
            self.snapshot = snapshot

    def latest(self) -> dict:
        with self.lock:
            return dict(self.snapshot)


def _sim_snapshot(run_id: str, status: str, sim: Simulation) -> dict:
    nodes = []
    heads = set()
    for node_id in sorted(sim.nodes):
        n = sim.nodes[node_id]
        chain = n.store.mainchain()
        tiles = [
            {
                "number": b.number,
                "hash": b.hash.hex(),
                "color": color_of(b.hash),
            }
            for b in chain[-2:]
        ]
        heads.add(n.store.head)
        nodes.append(
            {
                "node_id": node_id,
                "head_hash": n.store.head.hex(),
                "head_number": n.store.height,
                "sync_state": "live" if n.live else "syncing",
                "peer_count": len(n.peer_status),
                "last_two": tiles,
            }
        )
    return {
        "run_id": run_id,
        "status": status,
        "t_ms": int(sim.sched.now),
        "nodes": nodes,
        "consensus": len(heads) == 1,
    }


class Orchestrator:
    """Owns run lifecycles; all state sharing with nodes happens via
    messages (simulated scheduler events or real sockets)."""

    def __init__(self) -> None:
        self._runs: dict[str, _Run] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def start_run(self, config: ExperimentConfig) -> str:
        problems = config.problems()
        if problems:
            raise InvalidParameterError("; ".join(problems))
        with self._lock:
            self._counter += 1
            run_id = f"run-{self._counter:04d}"
            run = _Run(RunRecord(run_id=run_id, config=config))
            self._runs[run_id] = run
        if config.mode == MODE_SIMULATED:
            target = self._drive_simulated
        elif config.mode == MODE_MULTIPROCESS:
            target = self._drive_multiprocess
        else:
            raise InvalidParameterError(f"unknown mode {config.mode!r}")
        run.thread = threading.Thread(target=target, args=(run,), daemon=True)
        run.thread.start()
        return run_id

    def _get(self, run_id: str) -> _Run:
        try:
            return self._runs[run_id]
        except KeyError:
            raise RunNotFound(run_id) from None

    def stop_run(self, run_id: str) -> None:
        run = self._get(run_id)
        run.abort_requested = True
        if run.driver is not None:
            run.driver.request_stop()

    def get_status(self, run_id: str) -> dict:
        return self._get(run_id).latest()

    def get_record(self, run_id: str) -> RunRecord:
        return self._get(run_id).record

    def list_runs(self) -> list[dict]:
        with self._lock:
            runs = list(self._runs.values())
        return [
            {
                "run_id": r.record.run_id,
                "name": r.record.config.name,
                "status": r.record.status,
                "mode": r.record.config.mode,
                "n": r.record.config.n,
            }
            for r in runs
        ]

    def wait(self, run_id: str, timeout: Optional[float] = None) -> RunRecord:
        run = self._get(run_id)
        if run.thread is not None:
            run.thread.join(timeout)
        return run.record

    def export_run(self, run_id: str, directory: str | Path) -> Path:
        record = self._get(run_id).record
        if record.status == STATUS_RUNNING:
            raise InvalidParameterError("run still in progress")
        return export_result(record, directory)

    # ------------------------------------------------------------------

    def _drive_simulated(self, run: _Run) -> None:
        record = run.record
        config = record.config
        try:
            sim = Simulation(config)
            last_pub = 0.0
            wall_start = time.perf_counter()

            def after_event(s: Simulation) -> None:
                nonlocal last_pub
                if run.abort_requested:
                    s.abort = True
                now = time.perf_counter()
                if now - last_pub >= SNAPSHOT_INTERVAL_S:
                    last_pub = now
                    run.publish(_sim_snapshot(record.run_id, record.status, s))
                if config.pace is not None:
                    target = wall_start + (s.sched.now / config.pace) / 1000.0
                    while True:
                        lag = target - time.perf_counter()
                        if lag <= 0 or run.abort_requested:
                            break
                        time.sleep(min(lag, 0.05))

            result = sim.run(after_event=after_event)
            record.logs = result.logs
            record.sim_time_ms = result.sim_time_ms
            if result.aborted:
                record.status = STATUS_ABORTED
            else:
                record.metrics = compute_metrics(result.logs)
                record.status = STATUS_COMPLETED
            run.publish(_sim_snapshot(record.run_id, record.status, sim))
        except Exception as exc:  # pragma: no cover - surfaced via status
            log.exception("simulated run %s failed", record.run_id)
            record.status = STATUS_ABORTED
            record.error = str(exc)
            snap = run.latest()
            snap["status"] = record.status
            run.publish(snap)
        finally:
            record.finished_at = time.time()

    def _drive_multiprocess(self, run: _Run) -> None:
        from .procnet import MultiprocessFleet

        record = run.record
        try:
            fleet = MultiprocessFleet(record.config)
            run.driver = fleet
            result = fleet.run(publish=run.publish, run_id=record.run_id)
            record.logs = result.logs
            if result.aborted:
                record.status = STATUS_ABORTED
            else:
                record.metrics = compute_metrics(result.logs)
                record.status = STATUS_COMPLETED
        except Exception as exc:
            log.exception("multiprocess run %s failed", record.run_id)
            record.status = STATUS_ABORTED
            record.error = str(exc)
        finally:
            record.finished_at = time.time()
            snap = run.latest()
            snap["status"] = record.status
            run.publish(snap)


def replay_log(genesis, log: list[NodeEvent]):
    """Rebuild a node's chain from its event log.

    Returns (store, ok) where ok means the replayed head equals the last
    HeadChanged the node reported — the log-completeness check.
    """
    from .chain import Block, ChainStore
    from .events import HeadChanged, Mined, Received

    store = ChainStore(genesis)
    last_head: Optional[bytes] = None
    for ev in log:
        if isinstance(ev, (Mined, Received)):
            store.insert(ev.block)
        elif isinstance(ev, HeadChanged):
            last_head = ev.new_hash
    expected = last_head if last_head is not None else genesis.hash
    return store, store.head == expected


# ----------------------------------------------------------------------
# run directory layout: config.json, logs/<node>.jsonl, metrics.json/.txt


def export_result(record: RunRecord, directory: str | Path) -> Path:
    out = Path(directory)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(record.config.to_json())
    if record.logs is not None:
        for node_id, events_list in sorted(record.logs.items()):
            (out / "logs" / f"{node_id}.jsonl").write_text(dump_log(events_list))
    if record.metrics is not None:
        (out / "metrics.json").write_text(record.metrics.to_json())
        (out / "metrics.txt").write_text(record.metrics.to_table())
    meta = {
        "run_id": record.run_id,
        "status": record.status,
        "sim_time_ms": record.sim_time_ms,
        "error": record.error,
    }
    (out / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return out


def load_run_dir(directory: str | Path) -> tuple[ExperimentConfig, dict[str, list[NodeEvent]]]:
    root = Path(directory)
    config = ExperimentConfig.from_json((root / "config.json").read_text())
    logs = {}
    for path in sorted((root / "logs").glob("*.jsonl")):
        logs[path.stem] = parse_log(path.read_text())
    if not logs:
        raise InvalidParameterError(f"no event logs under {root}/logs")
    return config, logs
