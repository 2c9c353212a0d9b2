"""Supervised fine-tuning of the adapter parameters on prompt/target pairs."""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import torch
from torch import nn

from .adapters import (
    adapter_parameter_count,
    adapter_parameters,
    adapter_state_dict,
    inject_adapters,
    load_adapter_state,
)
from .config import STAGE_SFT, PolicyCheckpoint, TrainerConfig
from .toy import BOS, EOS, PAD, ToyCausalLM, ToyTokenizer, count_parameters

logger = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    """Non-finite loss encountered; aborts with diagnostics."""


def load_pairs(path: str | Path) -> list[dict]:
    pairs = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(pairs, list) or not pairs:
        raise ValueError(f"{path}: expected a nonempty list of prompt/target pairs")
    for pair in pairs:
        if not pair.get("prompt") or not pair.get("target"):
            raise ValueError(f"{path}: every pair needs prompt and target text")
    return pairs


def build_model(config: TrainerConfig, tokenizer: ToyTokenizer) -> ToyCausalLM:
    torch.manual_seed(config.seed)
    model = ToyCausalLM(
        vocab_size=len(tokenizer),
        d_model=config.d_model,
        n_layers=config.n_layers,
        n_heads=config.n_heads,
        max_seq_len=config.max_seq_len,
    )
    wrapped = inject_adapters(
        model,
        rank=config.adapter_rank,
        alpha=config.adapter_alpha,
        dropout=config.adapter_dropout,
        quant_bits=config.quant_bits,
    )
    logger.info(
        "adapters on %d linears: %d trainable of %d total parameters",
        len(wrapped),
        adapter_parameter_count(model),
        count_parameters(model),
    )
    return model


def _encode_pair(tokenizer: ToyTokenizer, pair: dict, max_len: int):
    prompt_ids = tokenizer.encode(pair["prompt"], add_bos=True)
    target_ids = tokenizer.encode(pair["target"], add_eos=True)
    ids = (prompt_ids + target_ids)[:max_len]
    # next-token labels; prompt positions are masked out of the loss
    labels = [-100] * (len(prompt_ids) - 1) + target_ids
    labels = labels[: len(ids) - 1]
    return ids, labels


def _batchify(encoded: list[tuple[list[int], list[int]]], batch_size: int):
    for start in range(0, len(encoded), batch_size):
        chunk = encoded[start : start + batch_size]
        width = max(len(ids) for ids, _ in chunk)
        ids = torch.full((len(chunk), width), PAD, dtype=torch.long)
        labels = torch.full((len(chunk), width - 1), -100, dtype=torch.long)
        for row, (seq, lab) in enumerate(chunk):
            ids[row, : len(seq)] = torch.tensor(seq)
            labels[row, : len(lab)] = torch.tensor(lab)
        yield ids, labels


@torch.no_grad()
def _eval_loss(model, encoded, config: TrainerConfig, loss_fn) -> float:
    model.eval()
    total, batches = 0.0, 0
    for ids, labels in _batchify(encoded, config.batch_size):
        logits = model(ids[:, :-1])
        total += loss_fn(logits.reshape(-1, logits.size(-1)), labels.reshape(-1)).item()
        batches += 1
    return total / batches


def _warmup_schedule(optimizer, total_steps: int, warmup_ratio: float):
    warmup_steps = max(1, int(round(total_steps * warmup_ratio)))

    def factor(step: int) -> float:
        if step < warmup_steps:
            return (step + 1) / warmup_steps
        return 1.0

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


def run_sft(
    config: TrainerConfig,
    pairs: list[dict],
    epochs: int | None = None,
    init_state: dict | None = None,
) -> PolicyCheckpoint:
    """Train the adapters on prompt/target pairs; returns a checkpoint whose
    metrics carry the per-epoch mean loss."""
    tokenizer = ToyTokenizer(
        [p["prompt"] for p in pairs] + [p["target"] for p in pairs]
    )
    model = build_model(config, tokenizer)
    if init_state is not None:
        load_adapter_state(model, init_state)

    epochs = epochs or config.sft_epochs
    encoded = [_encode_pair(tokenizer, p, config.max_seq_len) for p in pairs]
    batches_per_epoch = math.ceil(len(encoded) / config.batch_size)
    steps_per_epoch = math.ceil(batches_per_epoch / config.grad_accumulation_steps)
    total_steps = steps_per_epoch * epochs

    optimizer = torch.optim.AdamW(adapter_parameters(model), lr=config.sft_learning_rate)
    scheduler = _warmup_schedule(optimizer, total_steps, config.warmup_ratio)
    loss_fn = nn.CrossEntropyLoss(ignore_index=-100)

    torch.manual_seed(config.seed + 1)
    epoch_losses: list[float] = []
    train_losses: list[float] = []
    for epoch in range(epochs):
        model.train()
        running, seen = 0.0, 0
        optimizer.zero_grad()
        for batch_index, (ids, labels) in enumerate(_batchify(encoded, config.batch_size)):
            logits = model(ids[:, :-1])
            loss = loss_fn(logits.reshape(-1, logits.size(-1)), labels.reshape(-1))
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch + 1}, batch {batch_index}"
                )
            (loss / config.grad_accumulation_steps).backward()
            running += loss.item()
            seen += 1
            if (batch_index + 1) % config.grad_accumulation_steps == 0:
                optimizer.step()
                scheduler.step()
                optimizer.zero_grad()
        if seen % config.grad_accumulation_steps:
            optimizer.step()
            scheduler.step()
            optimizer.zero_grad()
        train_losses.append(running / seen)
        # dropout-free pass after the epoch's updates; this is the reported loss
        epoch_losses.append(_eval_loss(model, encoded, config, loss_fn))
        logger.info(
            "sft epoch %d/%d loss %.6f (train %.6f)",
            epoch + 1, epochs, epoch_losses[-1], train_losses[-1],
        )

    return PolicyCheckpoint(
        stage=STAGE_SFT,
        adapter_state=adapter_state_dict(model),
        config_echo=config.echo(),
        metrics={
            "epoch_losses": epoch_losses,
            "train_losses": train_losses,
            "adapter_parameters": adapter_parameter_count(model),
            "total_parameters": count_parameters(model),
            "vocab_size": len(tokenizer),
        },
    )


def save_checkpoint(checkpoint: PolicyCheckpoint, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.save(checkpoint.adapter_state, out_dir / "adapter_state.pt")
    (out_dir / "checkpoint.json").write_text(
        json.dumps(
            {"stage": checkpoint.stage, "config": checkpoint.config_echo,
             "metrics": checkpoint.metrics},
            indent=2,
            sort_keys=True,
        )
        + "\n",
        encoding="utf-8",
    )
    return out_dir


def load_checkpoint(path: str | Path) -> PolicyCheckpoint:
    path = Path(path)
    meta = json.loads((path / "checkpoint.json").read_text(encoding="utf-8"))
    state = torch.load(path / "adapter_state.pt", weights_only=True)
    return PolicyCheckpoint(
        stage=meta["stage"],
        adapter_state=state,
        config_echo=meta["config"],
        metrics=meta.get("metrics", {}),
    )
