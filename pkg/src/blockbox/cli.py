"""Command-line interface: run experiments, calibrate difficulty, compute
metrics, replay logs, export runs and serve the control API."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .chain import GenesisConfig, genesis_block
from .config import ExperimentConfig, calibrate_difficulty
from .metrics import compute_metrics
from .node import NodeConfig
from .orchestrator import (
    Orchestrator,
    export_result,
    load_run_dir,
    measure_hashrate,
    replay_log,
)

DEFAULT_PORT = int(os.environ.get("BLOCKBOX_PORT", "8321"))


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON file (flags override)")
    p.add_argument("--name")
    p.add_argument("--topology", help="ring | star | grid | custom")
    p.add_argument("--nodes", type=int, help="node count")
    p.add_argument("--difficulty", help="integer or 'auto' (calibrated)")
    p.add_argument("--chain-id", type=int)
    p.add_argument("--target-ms", type=float, help="target block interval")
    p.add_argument("--stop-height", type=int)
    p.add_argument("--stop-duration-ms", type=float)
    p.add_argument("--mode", choices=["simulated", "multiprocess"])
    p.add_argument("--seed", type=int)
    p.add_argument("--latency-base-ms", type=float)
    p.add_argument("--latency-jitter-ms", type=float)
    p.add_argument("--hashrate", type=float, help="attempts/sec per node")
    p.add_argument("--pace", type=float, help="simulated ms per wall ms")


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    base: dict = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    if args.name:
        base["name"] = args.name
    if args.topology:
        base["topology"] = args.topology
        base.pop("n", None)
    if args.nodes:
        base["n"] = args.nodes
        if isinstance(base.get("topology"), dict):
            base["topology"]["n"] = args.nodes
    if isinstance(base.get("topology"), str):
        base.setdefault("n", 9)
        base["topology"] = {"kind": base["topology"], "n": base["n"]}
        if base["topology"]["kind"] == "grid":
            side = int(base["n"] ** 0.5)
            base["topology"].update(rows=side, cols=side)
    if args.difficulty is not None:
        base.setdefault("genesis", {})["difficulty"] = (
            "auto" if args.difficulty == "auto" else int(args.difficulty)
        )
    if args.chain_id is not None:
        base.setdefault("genesis", {})["chain_id"] = args.chain_id
    if args.target_ms is not None:
        base["target_interval_ms"] = args.target_ms
    if args.stop_height is not None:
        base["stop"] = {"height": args.stop_height}
    if args.stop_duration_ms is not None:
        base["stop"] = {"duration_ms": args.stop_duration_ms}
    if args.mode:
        base["mode"] = args.mode
    if args.seed is not None:
        base["seed"] = args.seed
    if args.latency_base_ms is not None or args.latency_jitter_ms is not None:
        lat = base.setdefault("latency", {})
        if args.latency_base_ms is not None:
            lat["base_ms"] = args.latency_base_ms
        if args.latency_jitter_ms is not None:
            lat["jitter_ms"] = args.latency_jitter_ms
    if args.hashrate is not None:
        base["hashrate"] = args.hashrate
    if args.pace is not None:
        base["pace"] = args.pace
    return ExperimentConfig.from_dict(base)


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    orch = Orchestrator()
    run_id = orch.start_run(config)
    record = orch.wait(run_id)
    if record.status != "completed":
        print(f"run {record.status}: {record.error or ''}", file=sys.stderr)
        return 1
    if args.out:
        export_result(record, args.out)
        print(f"exported to {args.out}")
    print(record.metrics.to_table(), end="")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    d = calibrate_difficulty(args.nodes, args.hashrate, args.target_ms)
    print(d)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    _, logs = load_run_dir(args.run_dir)
    report = compute_metrics(logs)
    stored = Path(args.run_dir) / "metrics.json"
    if args.check:
        if not stored.exists():
            print("no stored metrics.json to check against", file=sys.stderr)
            return 1
        if stored.read_text() != report.to_json():
            print("MISMATCH: recomputed metrics differ from stored report", file=sys.stderr)
            return 1
        print("stored metrics reproduce byte-for-byte")
    print(report.to_table(), end="")
    return 0


def cmd_replay(args: argparse.Namespace) -> int:
    config, logs = load_run_dir(args.run_dir)
    genesis = genesis_block(config.genesis)
    ok_all = True
    for node_id, log in sorted(logs.items()):
        store, ok = replay_log(genesis, log)
        ok_all &= ok
        print(f"{node_id}: replayed {len(log)} events -> head {store.head.hex()[:12]} "
              f"height {store.height} {'OK' if ok else 'HEAD MISMATCH'}")
    return 0 if ok_all else 1


def cmd_export(args: argparse.Namespace) -> int:
    import urllib.request

    url = f"{args.server.rstrip('/')}/api/runs/{args.run_id}/export"
    body = json.dumps({"directory": args.out}).encode()
    req = urllib.request.Request(url, data=body, headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req) as resp:
        print(resp.read().decode())
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="info")
    return 0


def cmd_measure_hashrate(args: argparse.Namespace) -> int:
    cfg = NodeConfig(node_id="probe", genesis=GenesisConfig(chain_id=0, difficulty=1))
    rate = measure_hashrate(cfg, args.duration)
    print(f"{rate:.0f}")
    return 0


def cmd_node(args: argparse.Namespace) -> int:
    from .procnet import run_node

    config = NodeConfig(
        node_id=args.node_id,
        genesis=GenesisConfig(
            chain_id=args.chain_id,
            difficulty=args.difficulty,
            extra=bytes.fromhex(args.extra_hex),
        ),
        peers=tuple(args.dial.split(",")) if args.dial else (),
        hashrate_limit=args.hashrate,
    )
    run_node(
        config,
        listen_port=args.listen_port,
        command_port=args.command_port,
        dial=list(config.peers),
        log_path=args.log,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="blockbox",
                                     description="proof-of-work network in a box")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment to completion")
    _add_config_args(p)
    p.add_argument("--out", help="export the run directory here")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("calibrate", help="difficulty for a target block interval")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--hashrate", type=float, required=True, help="attempts/sec per node")
    p.add_argument("--target-ms", type=float, required=True)
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("metrics", help="recompute metrics from a run directory")
    p.add_argument("run_dir")
    p.add_argument("--check", action="store_true",
                   help="verify the stored metrics.json reproduces byte-for-byte")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("replay", help="rebuild each node's chain from its log")
    p.add_argument("run_dir")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("export", help="ask a running server to export a run")
    p.add_argument("run_id")
    p.add_argument("--server", default=f"http://127.0.0.1:{DEFAULT_PORT}")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("serve", help="start the control API / panel server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT,
                   help="defaults to $BLOCKBOX_PORT or 8321")
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("measure-hashrate", help="probe this machine's attempt rate")
    p.add_argument("--duration", type=float, default=2.0)
    p.set_defaults(fn=cmd_measure_hashrate)

    p = sub.add_parser("node", help="internal: run one real node process")
    p.add_argument("--node-id", required=True)
    p.add_argument("--chain-id", type=int, required=True)
    p.add_argument("--difficulty", type=int, required=True)
    p.add_argument("--extra-hex", default="")
    p.add_argument("--listen-port", type=int, required=True)
    p.add_argument("--command-port", type=int, required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--hashrate", type=float)
    p.add_argument("--dial", default="")
    p.set_defaults(fn=cmd_node)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
