"""Tiny byte-level causal transformer plus LoRA adapter injection.

The base model is deliberately small so the training loops run on CPU;
its attention and feed-forward projections carry the standard module
names (q_proj, k_proj, v_proj, o_proj, ffn_*) that adapter targets refer
to.
"""

from __future__ import annotations

import math

import torch
from torch import nn

VOCAB_SIZE = 256  # raw bytes; text is encoded latin-1 with replacement


def encode(text: str, cutoff: int) -> torch.Tensor:
    data = text.encode("latin-1", errors="replace")[:cutoff]
    return torch.tensor(list(data), dtype=torch.long)


def decode(ids: torch.Tensor) -> str:
    return bytes(int(i) for i in ids).decode("latin-1", errors="replace")


class Block(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.q_proj = nn.Linear(d_model, d_model, bias=False)
        self.k_proj = nn.Linear(d_model, d_model, bias=False)
        self.v_proj = nn.Linear(d_model, d_model, bias=False)
        self.o_proj = nn.Linear(d_model, d_model, bias=False)
        self.ffn_up = nn.Linear(d_model, 4 * d_model, bias=False)
        self.ffn_down = nn.Linear(4 * d_model, d_model, bias=False)
        self.ln1 = nn.LayerNorm(d_model)
        self.ln2 = nn.LayerNorm(d_model)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, t, d = x.shape
        h = self.ln1(x)
        head_dim = d // self.n_heads

        def split(proj):
            return proj(h).view(b, t, self.n_heads, head_dim).transpose(1, 2)

        q, k, v = split(self.q_proj), split(self.k_proj), split(self.v_proj)
        scores = q @ k.transpose(-2, -1) / math.sqrt(head_dim)
        mask = torch.triu(torch.ones(t, t, dtype=torch.bool,
                                     device=x.device), diagonal=1)
        scores = scores.masked_fill(mask, float("-inf"))
        attended = (scores.softmax(dim=-1) @ v).transpose(1, 2).reshape(b, t, d)
        x = x + self.o_proj(attended)
        x = x + self.ffn_down(torch.nn.functional.gelu(self.ffn_up(self.ln2(x))))
        return x


class TinyCharLM(nn.Module):
    def __init__(self, d_model: int = 128, n_heads: int = 4,
                 n_layers: int = 2, max_len: int = 4096):
        super().__init__()
        self.max_len = max_len
        self.embed = nn.Embedding(VOCAB_SIZE, d_model)
        self.pos = nn.Embedding(max_len, d_model)
        self.blocks = nn.ModuleList(Block(d_model, n_heads)
                                    for _ in range(n_layers))
        self.ln_out = nn.LayerNorm(d_model)
        self.lm_head = nn.Linear(d_model, VOCAB_SIZE, bias=False)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        if ids.dim() == 1:
            ids = ids.unsqueeze(0)
        t = ids.shape[1]
        if t > self.max_len:
            ids = ids[:, -self.max_len:]
            t = self.max_len
        x = self.embed(ids) + self.pos(torch.arange(t, device=ids.device))
        for block in self.blocks:
            x = block(x)
        return self.lm_head(self.ln_out(x))

    @torch.no_grad()
    def sample(self, prompt: str, max_new_tokens: int, temperature: float,
               generator: torch.Generator | None = None) -> str:
        ids = encode(prompt or " ", self.max_len // 2)
        out = []
        for _ in range(max_new_tokens):
            logits = self(ids.unsqueeze(0))[0, -1] / temperature
            probs = logits.float().softmax(dim=-1)
            pick = torch.multinomial(probs, 1, generator=generator)
            out.append(int(pick))
            ids = torch.cat([ids, pick])
        return decode(torch.tensor(out))


class LoRALinear(nn.Module):
    """Frozen base projection plus a trainable low-rank update."""

    def __init__(self, base: nn.Linear, rank: int):
        super().__init__()
        self.base = base
        for param in self.base.parameters():
            param.requires_grad_(False)
        out_features, in_features = base.weight.shape
        self.lora_a = nn.Parameter(torch.randn(rank, in_features) / rank)
        self.lora_b = nn.Parameter(torch.zeros(out_features, rank))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.base(x) + x @ self.lora_a.T @ self.lora_b.T


def apply_lora(model: nn.Module, rank: int,
               targets: tuple[str, ...]) -> int:
    """Freeze the model and wrap every Linear whose name matches a target
    prefix with a LoRA adapter. Returns the number of wrapped modules."""
    for param in model.parameters():
        param.requires_grad_(False)
    wrapped = 0
    for module in model.modules():
        for name, child in list(module.named_children()):
            if isinstance(child, nn.Linear) and any(
                    name.startswith(t) for t in targets):
                setattr(module, name, LoRALinear(child, rank))
                wrapped += 1
    return wrapped


def lora_state_dict(model: nn.Module) -> dict:
    return {name: tensor for name, tensor in model.state_dict().items()
            if "lora_" in name}
