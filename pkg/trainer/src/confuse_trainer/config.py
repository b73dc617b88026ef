"""Training configuration with the published hyperparameter defaults."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

#: The learning-rate grid searched in the experiments; values outside it
#: are rejected so runs stay comparable.
LEARNING_RATE_GRID = (3e-6, 1e-5, 3e-5)

DEFAULT_TARGETS = ("q_proj", "k_proj", "v_proj", "o_proj", "ffn")


class Method(Enum):
    SFT = "sft"
    DPO = "dpo"
    ONLINE_DPO = "online-dpo"
    INTERACT_DPO = "interact-dpo"


#: Methods that label or pair inquiries through the environment service.
ENV_METHODS = (Method.ONLINE_DPO, Method.INTERACT_DPO)


@dataclass(frozen=True)
class AdapterConfig:
    rank: int = 64
    targets: tuple[str, ...] = DEFAULT_TARGETS

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("adapter rank must be >= 1")
        if not self.targets:
            raise ValueError("adapter needs at least one target module")


@dataclass(frozen=True)
class TrainConfig:
    base_model: str
    method: Method
    learning_rate: float = 1e-5
    epochs: int = 5
    adapter: AdapterConfig = field(default_factory=AdapterConfig)
    cutoff_length: int = 32768
    precision: str = "bf16"
    env_url: str | None = None

    # unstated in the source experiments; recorded here, excluded from
    # any reproduction claim
    beta: float = 0.1
    batch_size: int = 8
    sample_temperature: float = 0.8
    max_new_tokens: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate not in LEARNING_RATE_GRID:
            raise ValueError(
                f"learning_rate must be one of {LEARNING_RATE_GRID}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.cutoff_length < 1:
            raise ValueError("cutoff_length must be >= 1")
        if self.precision not in ("bf16", "fp32"):
            raise ValueError("precision must be 'bf16' or 'fp32'")
        if self.method in ENV_METHODS and not self.env_url:
            raise ValueError(
                f"{self.method.value} requires env_url to be set")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 < self.sample_temperature <= 2:
            raise ValueError("sample_temperature must be in (0, 2]")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
