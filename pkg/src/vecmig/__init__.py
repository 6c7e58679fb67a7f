"""vecmig: seeded simulator of agent-service migration across roadside
units under DDoS and compromised-infrastructure attacks, with a
multi-agent PPO pre-migration trainer and an RSU trust engine."""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config
from .env import MigrationEnv
from .mappo import baseline_policy, evaluate, train
from .trust import TrustEngine

__all__ = [
    "ExperimentConfig",
    "MigrationEnv",
    "TrustEngine",
    "baseline_policy",
    "evaluate",
    "load_config",
    "train",
    "__version__",
]
