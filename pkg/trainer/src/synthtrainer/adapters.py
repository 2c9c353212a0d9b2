"""Low-rank adapter layers with quantized frozen bases.

The wrapped linear computes ``W x + dropout(scale * B(A(x)))`` with
``scale = alpha / rank``; A starts near zero and B starts at zero, so a
freshly adapted model is numerically identical to its base. Base weights
are frozen and stored through a round-trip uniform quantizer at the
configured bit width.
"""

from __future__ import annotations

import torch
from torch import nn


def fake_quantize(tensor: torch.Tensor, bits: int) -> torch.Tensor:
    """Symmetric per-tensor round-trip quantization at ``bits`` width."""
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if bits >= 16:
        return tensor.clone()
    max_val = tensor.abs().max()
    if max_val == 0:
        return tensor.clone()
    levels = 2 ** (bits - 1) - 1
    scale = max_val / levels
    return torch.clamp(torch.round(tensor / scale), -levels - 1, levels) * scale


class LoRALinear(nn.Module):
    """Frozen (quantized) linear plus a trainable rank-r update."""

    def __init__(self, base: nn.Linear, rank: int, alpha: float,
                 dropout: float, quant_bits: int):
        super().__init__()
        self.in_features = base.in_features
        self.out_features = base.out_features
        self.scale = alpha / rank

        weight = fake_quantize(base.weight.data, quant_bits)
        self.weight = nn.Parameter(weight, requires_grad=False)
        if base.bias is not None:
            self.bias = nn.Parameter(base.bias.data.clone(), requires_grad=False)
        else:
            self.bias = None

        self.lora_a = nn.Parameter(torch.empty(rank, self.in_features))
        self.lora_b = nn.Parameter(torch.zeros(self.out_features, rank))
        nn.init.normal_(self.lora_a, std=0.02)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        frozen = nn.functional.linear(x, self.weight, self.bias)
        update = nn.functional.linear(nn.functional.linear(x, self.lora_a), self.lora_b)
        return frozen + self.dropout(self.scale * update)


def inject_adapters(model: nn.Module, rank: int, alpha: float, dropout: float,
                    quant_bits: int) -> list[str]:
    """Replace every attention/MLP linear with an adapted copy; freeze the rest.

    Returns the qualified names of the wrapped modules.
    """
    for param in model.parameters():
        param.requires_grad = False

    wrapped: list[str] = []
    for name, module in list(model.named_modules()):
        for child_name, child in list(module.named_children()):
            if isinstance(child, nn.Linear) and not isinstance(child, LoRALinear):
                full_name = f"{name}.{child_name}" if name else child_name
                if "head" in full_name:
                    continue  # keep the LM head tied to the frozen base
                setattr(module, child_name,
                        LoRALinear(child, rank, alpha, dropout, quant_bits))
                wrapped.append(full_name)
    return wrapped


def adapter_parameters(model: nn.Module):
    for name, param in model.named_parameters():
        if "lora_" in name:
            yield param


def adapter_state_dict(model: nn.Module) -> dict:
    return {
        name: param.detach().clone()
        for name, param in model.named_parameters()
        if "lora_" in name
    }


def load_adapter_state(model: nn.Module, state: dict) -> None:
    own = dict(model.named_parameters())
    missing = [name for name in state if name not in own]
    if missing:
        raise KeyError(f"adapter state has unknown parameters: {missing[:3]}")
    with torch.no_grad():
        for name, value in state.items():
            own[name].copy_(value)


def adapter_parameter_count(model: nn.Module) -> int:
    return sum(p.numel() for p in adapter_parameters(model))
