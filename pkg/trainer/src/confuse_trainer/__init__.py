"""Fine-tuning loops over inquiry preference pairs.

Consumes the pair JSONL files and the HTTP interaction environment
emitted by the benchmark pipeline; produces LoRA adapter artifacts and a
per-step training log.
"""

from confuse_trainer.config import AdapterConfig, Method, TrainConfig
from confuse_trainer.data import Pair, read_pairs, write_pairs
from confuse_trainer.train import EnvUnreachableError, TrainResult, train

__all__ = [
    "AdapterConfig", "Method", "TrainConfig", "Pair", "read_pairs",
    "write_pairs", "EnvUnreachableError", "TrainResult", "train",
]
