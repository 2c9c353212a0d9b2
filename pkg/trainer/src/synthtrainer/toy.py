"""Desk-scale causal language model and word-level tokenizer.

Small enough to train on a CPU in seconds, real enough to exercise the
full fine-tuning wiring: token embeddings, causal self-attention blocks
and an LM head, all in plain torch.
"""

from __future__ import annotations

import math

import torch
from torch import nn

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ["<pad>", "<bos>", "<eos>", "<unk>"]


class ToyTokenizer:
    """Word-level tokenizer with a vocabulary frozen from training texts."""

    def __init__(self, texts: list[str]):
        words = sorted({w for text in texts for w in text.split()})
        self.itos = SPECIALS + words
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def encode(self, text: str, add_bos: bool = False, add_eos: bool = False) -> list[int]:
        ids = [self.stoi.get(w, UNK) for w in text.split()]
        if add_bos:
            ids = [BOS] + ids
        if add_eos:
            ids = ids + [EOS]
        return ids

    def decode(self, ids: list[int]) -> str:
        return " ".join(self.itos[i] for i in ids if i > UNK)


class CausalSelfAttention(nn.Module):
    """Multi-head causal attention with plain linear projections, so adapter
    wrappers on the projections stay on the forward path."""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.proj = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        batch, n, d = x.shape
        q, k, v = self.qkv(x).split(d, dim=-1)
        shape = (batch, n, self.n_heads, self.head_dim)
        q = q.view(shape).transpose(1, 2)
        k = k.view(shape).transpose(1, 2)
        v = v.view(shape).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        mask = torch.triu(torch.ones(n, n, dtype=torch.bool, device=x.device), diagonal=1)
        scores = scores.masked_fill(mask, float("-inf"))
        out = torch.softmax(scores, dim=-1) @ v
        out = out.transpose(1, 2).reshape(batch, n, d)
        return self.proj(out)


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(d_model)
        self.attn = CausalSelfAttention(d_model, n_heads)
        self.ln2 = nn.LayerNorm(d_model)
        self.mlp = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.GELU(),
            nn.Linear(4 * d_model, d_model),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = x + self.attn(self.ln1(x))
        x = x + self.mlp(self.ln2(x))
        return x


class ToyCausalLM(nn.Module):
    def __init__(self, vocab_size: int, d_model: int = 64, n_layers: int = 2,
                 n_heads: int = 2, max_seq_len: int = 160):
        super().__init__()
        self.max_seq_len = max_seq_len
        self.tok_emb = nn.Embedding(vocab_size, d_model)
        self.pos_emb = nn.Embedding(max_seq_len, d_model)
        self.blocks = nn.ModuleList(Block(d_model, n_heads) for _ in range(n_layers))
        self.ln_f = nn.LayerNorm(d_model)
        self.head = nn.Linear(d_model, vocab_size, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.size(1) > self.max_seq_len:
            raise ValueError(f"sequence length {ids.size(1)} exceeds {self.max_seq_len}")
        positions = torch.arange(ids.size(1), device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(positions)[None, :, :]
        for block in self.blocks:
            x = block(x)
        return self.head(self.ln_f(x))


def sequence_logprobs(model: nn.Module, ids: torch.Tensor) -> torch.Tensor:
    """Per-token log-probabilities of ids[1:] under the model."""
    logits = model(ids[:, :-1])
    logp = torch.log_softmax(logits, dim=-1)
    return logp.gather(-1, ids[:, 1:].unsqueeze(-1)).squeeze(-1)


@torch.no_grad()
def sample(
    model: nn.Module,
    prompt_ids: list[int],
    max_new_tokens: int,
    generator: torch.Generator,
    temperature: float = 1.0,
    min_new_tokens: int = 1,
) -> list[int]:
    """Ancestral sampling of a continuation; stops early on end-of-sequence
    once at least ``min_new_tokens`` tokens were produced."""
    ids = torch.tensor([prompt_ids], dtype=torch.long)
    for step in range(max_new_tokens):
        logits = model(ids)[0, -1] / temperature
        if step < min_new_tokens:
            logits = logits.clone()
            logits[EOS] = float("-inf")
        probs = torch.softmax(logits, dim=-1)
        next_id = torch.multinomial(probs, 1, generator=generator).item()
        ids = torch.cat([ids, torch.tensor([[next_id]])], dim=1)
        if (next_id == EOS and step + 1 >= min_new_tokens) or ids.size(1) >= model.max_seq_len:
            break
    return ids[0].tolist()


def count_parameters(module: nn.Module, trainable_only: bool = False) -> int:
    return sum(
        p.numel() for p in module.parameters() if p.requires_grad or not trainable_only
    )


def perplexity(loss: float) -> float:
    return math.exp(min(loss, 30.0))
