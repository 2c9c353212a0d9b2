"""Trainer configuration; hyperparameter defaults are the published values."""

from __future__ import annotations

from dataclasses import dataclass, asdict, field


@dataclass(frozen=True)
class TrainerConfig:
    base_model: str = "toy-causal-lm"
    # adapter contract
    adapter_rank: int = 8
    adapter_alpha: float = 16.0
    adapter_dropout: float = 0.05
    quant_bits: int = 4
    # supervised fine-tuning
    sft_learning_rate: float = 2e-4
    grad_accumulation_steps: int = 4
    warmup_ratio: float = 0.03
    sft_epochs: int = 5
    # PPO
    ppo_learning_rate: float = 2.94e-5
    ppo_epochs_per_batch: int = 10
    kl_coefficient: float = 0.2
    clip_epsilon: float = 0.2
    # toy-model shape and run knobs
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 2
    max_seq_len: int = 160
    batch_size: int = 2
    max_new_tokens: int = 24
    min_new_tokens: int = 1
    seed: int = 0

    def __post_init__(self):
        positive = (
            "adapter_rank", "adapter_alpha", "adapter_dropout", "quant_bits",
            "sft_learning_rate", "grad_accumulation_steps", "warmup_ratio",
            "sft_epochs", "ppo_learning_rate", "ppo_epochs_per_batch",
            "d_model", "n_layers", "n_heads", "max_seq_len", "batch_size",
            "max_new_tokens", "min_new_tokens",
        )
        for name in positive:
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.kl_coefficient < 0:
            raise ValueError("kl_coefficient must be >= 0")

    def echo(self) -> dict:
        return asdict(self)

    @classmethod
    def from_mapping(cls, mapping: dict) -> "TrainerConfig":
        return cls(**mapping)


STAGE_SFT = "sft"
STAGE_RL_BASIC = "rl-basic"
STAGE_RL_GPT4 = "rl-gpt4"
STAGES = (STAGE_SFT, STAGE_RL_BASIC, STAGE_RL_GPT4)

# rl-gpt4 policies continue from an earlier stage, never from scratch
GPT4_ALLOWED_PARENTS = (STAGE_SFT, STAGE_RL_BASIC)


@dataclass
class PolicyCheckpoint:
    """Adapter snapshot plus stage tag and the exact config that produced it."""

    stage: str
    adapter_state: dict
    config_echo: dict
    metrics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
