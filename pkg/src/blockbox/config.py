"""Experiment configuration: what to run, on which topology, how to stop."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Optional

from .chain import GenesisConfig, InvalidParameterError
from .topology import TopologySpec, generate, validate
from .wire import LatencyModel

log = logging.getLogger(__name__)

MODE_SIMULATED = "simulated"
MODE_MULTIPROCESS = "multiprocess"


def calibrate_difficulty(n: int, per_node_hashrate: float, target_interval_ms: float) -> int:
    """Difficulty giving one network block per target interval in expectation.

    Success probability per attempt is 1/D and the network tries
    n * hashrate attempts per second, so D = n * hashrate * interval.
    """
    if n <= 0 or per_node_hashrate <= 0 or target_interval_ms <= 0:
        raise InvalidParameterError("calibration inputs must be positive")
    d = round(n * per_node_hashrate * target_interval_ms / 1000.0)
    if d < 1:
        log.warning("calibrated difficulty %d below 1; clamping", d)
        return 1
    return int(d)


@dataclass(frozen=True)
class StopCondition:
    height: Optional[int] = None
    duration_ms: Optional[float] = None

    def __post_init__(self) -> None:
        if (self.height is None) == (self.duration_ms is None):
            raise InvalidParameterError("stop condition needs exactly one of height, duration_ms")
        if self.height is not None and self.height < 1:
            raise InvalidParameterError("stop height must be >= 1")
        if self.duration_ms is not None and self.duration_ms <= 0:
            raise InvalidParameterError("stop duration must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    topology: TopologySpec
    genesis: GenesisConfig
    target_interval_ms: float
    stop: StopCondition
    mode: str = MODE_SIMULATED
    seed: int = 0
    latency: LatencyModel = field(default_factory=LatencyModel)
    hashrate: float = 1000.0  # attempts/sec per node; the paper's fleet is homogeneous
    pace: Optional[float] = None  # simulated ms per wall ms; None = run flat out

    @property
    def n(self) -> int:
        return self.topology.n

    def node_ids(self) -> list[str]:
        return [f"n{i}" for i in range(self.n)]

    def problems(self) -> list[str]:
        out = list(validate(self.topology))
        if self.target_interval_ms <= 0:
            out.append("target_interval_ms must be positive")
        if self.mode not in (MODE_SIMULATED, MODE_MULTIPROCESS):
            out.append(f"unknown mode {self.mode!r}")
        if self.hashrate <= 0:
            out.append("hashrate must be positive")
        if self.pace is not None and self.pace <= 0:
            out.append("pace must be positive when set")
        return out

    def to_dict(self) -> dict:
        stop = (
            {"height": self.stop.height}
            if self.stop.height is not None
            else {"duration_ms": self.stop.duration_ms}
        )
        return {
            "name": self.name,
            "n": self.n,
            "topology": self.topology.to_dict(),
            "genesis": {
                "chain_id": self.genesis.chain_id,
                "difficulty": self.genesis.difficulty,
                "extra": self.genesis.extra.hex(),
            },
            "target_interval_ms": self.target_interval_ms,
            "stop": stop,
            "mode": self.mode,
            "seed": self.seed,
            "latency": {
                "base_ms": self.latency.base_ms,
                "jitter_ms": self.latency.jitter_ms,
                "seed": self.latency.seed,
            },
            "hashrate": self.hashrate,
            "pace": self.pace,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        topo_d = d["topology"]
        if isinstance(topo_d, str):
            topology = generate(topo_d, d["n"])
        else:
            topology = TopologySpec.from_dict(topo_d)
        if "n" in d and d["n"] != topology.n:
            raise InvalidParameterError("n does not match topology.n")

        name = d.get("name", "experiment")
        hashrate = float(d.get("hashrate", 1000.0))
        target = float(d.get("target_interval_ms", 1000.0))

        g = d.get("genesis", {})
        difficulty = g.get("difficulty", "auto")
        if difficulty in (None, "auto"):
            difficulty = calibrate_difficulty(topology.n, hashrate, target)
        extra = bytes.fromhex(g["extra"]) if "extra" in g else name.encode("utf-8")
        genesis = GenesisConfig(
            chain_id=int(g.get("chain_id", 1)), difficulty=int(difficulty), extra=extra
        )

        stop_d = d.get("stop", {"height": 10})
        stop = StopCondition(
            height=stop_d.get("height"),
            duration_ms=stop_d.get("duration_ms"),
        )

        lat_d = d.get("latency", {})
        latency = LatencyModel(
            base_ms=float(lat_d.get("base_ms", 0.0)),
            jitter_ms=float(lat_d.get("jitter_ms", 0.0)),
            seed=int(lat_d.get("seed", 0)),
        )
        return ExperimentConfig(
            name=name,
            topology=topology,
            genesis=genesis,
            target_interval_ms=target,
            stop=stop,
            mode=d.get("mode", MODE_SIMULATED),
            seed=int(d.get("seed", 0)),
            latency=latency,
            hashrate=hashrate,
            pace=d.get("pace"),
        )

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        return ExperimentConfig.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
