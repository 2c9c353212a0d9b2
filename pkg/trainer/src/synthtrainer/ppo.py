"""PPO-style policy optimization against the external reward service.

Each batch alternates rollout (sample syntheses, collect per-token
log-probabilities under the policy and the frozen reference), reward
queries over the service protocol, and clipped-surrogate updates of the
adapter parameters. The logged reward is the service's KL-penalized value;
the KL reference is the policy snapshot taken when the run starts.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Sequence

import torch

from .adapters import adapter_parameters, adapter_state_dict, load_adapter_state
from .config import (
    GPT4_ALLOWED_PARENTS,
    STAGE_RL_BASIC,
    STAGE_RL_GPT4,
    PolicyCheckpoint,
    TrainerConfig,
)
from .sft import TrainingDiverged, build_model
from .toy import ToyTokenizer, sample, sequence_logprobs

logger = logging.getLogger(__name__)


def compute_kl(policy_logprobs: Sequence[float], base_logprobs: Sequence[float]) -> float:
    """Sequence log-ratio of policy to reference: sum of per-token diffs."""
    if len(policy_logprobs) != len(base_logprobs):
        raise ValueError(
            f"logprob length mismatch: {len(policy_logprobs)} vs {len(base_logprobs)}"
        )
    total = 0.0
    for p, b in zip(policy_logprobs, base_logprobs):
        total += p - b
    return total


def _rollout(policy, base, tokenizer, prompts, config, generator):
    """Sample one continuation per prompt with both models' logprobs."""
    policy.eval()
    base.eval()
    episodes = []
    for prompt in prompts:
        prompt_ids = tokenizer.encode(prompt, add_bos=True)
        full_ids = sample(
            policy, prompt_ids, config.max_new_tokens, generator,
            min_new_tokens=config.min_new_tokens,
        )
        generated = full_ids[len(prompt_ids):]
        if not generated:
            continue
        ids = torch.tensor([full_ids], dtype=torch.long)
        with torch.no_grad():
            policy_lp = sequence_logprobs(policy, ids)[0, len(prompt_ids) - 1 :]
            base_lp = sequence_logprobs(base, ids)[0, len(prompt_ids) - 1 :]
        text = tokenizer.decode(generated) or "empty"
        episodes.append(
            {
                "prompt_len": len(prompt_ids),
                "ids": full_ids,
                "text": text,
                "policy_logprobs": [float(v) for v in policy_lp],
                "base_logprobs": [float(v) for v in base_lp],
            }
        )
    return episodes


def _ppo_update(policy, episodes, rewards, config, optimizer) -> float:
    """Clipped-surrogate epochs over one rollout batch; returns final loss."""
    policy.train()
    baseline = sum(rewards) / len(rewards)
    advantages = [r - baseline for r in rewards]
    old_logprobs = [
        torch.tensor(e["policy_logprobs"], dtype=torch.float32) for e in episodes
    ]

    loss_value = 0.0
    for _ in range(config.ppo_epochs_per_batch):
        optimizer.zero_grad()
        total = torch.zeros(())
        for episode, old_lp, adv in zip(episodes, old_logprobs, advantages):
            ids = torch.tensor([episode["ids"]], dtype=torch.long)
            new_lp = sequence_logprobs(policy, ids)[0, episode["prompt_len"] - 1 :]
            ratio = torch.exp(new_lp - old_lp)
            clipped = torch.clamp(ratio, 1 - config.clip_epsilon, 1 + config.clip_epsilon)
            surrogate = torch.minimum(ratio * adv, clipped * adv)
            total = total - surrogate.mean()
        loss = total / len(episodes)
        if not torch.isfinite(loss):
            raise TrainingDiverged("non-finite PPO loss")
        loss.backward()
        optimizer.step()
        loss_value = loss.detach().item()
    return loss_value


def run_ppo(
    config: TrainerConfig,
    prompts: list[str],
    reward_client,
    mode: str = "basic",
    init_checkpoint: PolicyCheckpoint | None = None,
    n_batches: int = 4,
    log_path: str | Path | None = None,
) -> PolicyCheckpoint:
    """Alternate generation, reward queries and policy updates.

    ``mode`` names the reward the service is running; quality-score mode
    requires a parent checkpoint from an earlier stage (never from scratch).
    """
    if mode == "gpt4":
        if init_checkpoint is None or init_checkpoint.stage not in GPT4_ALLOWED_PARENTS:
            raise ValueError(
                "quality-reward training continues a checkpoint staged "
                f"{GPT4_ALLOWED_PARENTS}, got "
                f"{init_checkpoint.stage if init_checkpoint else None!r}"
            )
        out_stage = STAGE_RL_GPT4
    else:
        out_stage = STAGE_RL_BASIC
    if not prompts:
        raise ValueError("no prompts for policy optimization")

    tokenizer = ToyTokenizer(prompts)
    policy = build_model(config, tokenizer)
    base = build_model(config, tokenizer)
    if init_checkpoint is not None:
        load_adapter_state(policy, init_checkpoint.adapter_state)
        load_adapter_state(base, init_checkpoint.adapter_state)
    for param in base.parameters():
        param.requires_grad = False

    optimizer = torch.optim.Adam(adapter_parameters(policy), lr=config.ppo_learning_rate)
    generator = torch.Generator().manual_seed(config.seed + 17)

    log_rows: list[dict] = []
    log_file = open(log_path, "w", encoding="utf-8") if log_path else None
    try:
        for batch_index in range(n_batches):
            start = (batch_index * config.batch_size) % len(prompts)
            batch_prompts = [
                prompts[(start + i) % len(prompts)] for i in range(config.batch_size)
            ]
            episodes = _rollout(policy, base, tokenizer, batch_prompts, config, generator)
            if not episodes:
                logger.warning("batch %d produced no tokens; skipped", batch_index)
                continue

            rewards, kls, raw_rewards = [], [], []
            for episode in episodes:
                response = reward_client.score(
                    {
                        "synthesis_text": episode["text"],
                        "policy_logprobs": episode["policy_logprobs"],
                        "base_logprobs": episode["base_logprobs"],
                    }
                )
                rewards.append(response["reward"])
                kls.append(response["kl"])
                raw_rewards.append(response["diagnostics"]["base_reward"])

            loss = _ppo_update(policy, episodes, rewards, config, optimizer)
            row = {
                "batch": batch_index,
                "episodes": len(episodes),
                "mean_reward": sum(rewards) / len(rewards),
                "mean_raw_reward": sum(raw_rewards) / len(raw_rewards),
                "mean_kl": sum(kls) / len(kls),
                "loss": loss,
            }
            if not all(math.isfinite(v) for v in (row["mean_reward"], row["mean_kl"], row["loss"])):
                raise TrainingDiverged(f"non-finite statistics in batch {batch_index}: {row}")
            log_rows.append(row)
            if log_file:
                log_file.write(json.dumps(row, sort_keys=True) + "\n")
                log_file.flush()
            logger.info(
                "ppo batch %d reward %.3f kl %.4f loss %.4f",
                batch_index, row["mean_reward"], row["mean_kl"], row["loss"],
            )
    finally:
        if log_file:
            log_file.close()

    return PolicyCheckpoint(
        stage=out_stage,
        adapter_state=adapter_state_dict(policy),
        config_echo=config.echo(),
        metrics={"batches": log_rows, "mode": mode},
    )
