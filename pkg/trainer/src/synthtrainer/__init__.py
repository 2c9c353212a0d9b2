"""Desk-scale adapter fine-tuning and PPO loop driven by an external
reward service."""

from .adapters import (
    LoRALinear,
    adapter_parameter_count,
    adapter_state_dict,
    fake_quantize,
    inject_adapters,
    load_adapter_state,
)
from .config import (
    GPT4_ALLOWED_PARENTS,
    STAGE_RL_BASIC,
    STAGE_RL_GPT4,
    STAGE_SFT,
    PolicyCheckpoint,
    TrainerConfig,
)
from .ppo import compute_kl, run_ppo
from .reward_client import (
    RewardServiceError,
    SocketRewardClient,
    StdioRewardClient,
    default_service_command,
    make_request,
)
from .sft import (
    TrainingDiverged,
    load_checkpoint,
    load_pairs,
    run_sft,
    save_checkpoint,
)
from .toy import ToyCausalLM, ToyTokenizer

__version__ = "0.1.0"
