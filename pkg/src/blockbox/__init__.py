"""blockbox: a proof-of-work blockchain network in a box.

Minimal PoW nodes, ring/star/grid peer topologies, a deterministic
network simulator, a multiprocess localhost mode, consensus-quality
metrics and an HTTP control API with a browser panel.
"""

from .chain import Block, ChainStore, GenesisConfig, genesis_block, pow_valid
from .config import ExperimentConfig, StopCondition, calibrate_difficulty
from .metrics import MetricsReport, compute_metrics
from .orchestrator import Orchestrator
from .simnet import Simulation
from .topology import TopologySpec, average_shortest_path, generate, validate

__version__ = "0.1.0"

__all__ = [
    "Block",
    "ChainStore",
    "ExperimentConfig",
    "GenesisConfig",
    "MetricsReport",
    "Orchestrator",
    "Simulation",
    "StopCondition",
    "TopologySpec",
    "average_shortest_path",
    "calibrate_difficulty",
    "compute_metrics",
    "generate",
    "genesis_block",
    "pow_valid",
    "validate",
    "__version__",
]
