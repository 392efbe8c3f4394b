"""Decoder-only transformer over event tokens."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import torch
import torch.nn.functional as F
from torch import Tensor, nn

INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    dim: int = 128
    heads: int = 4
    layers: int = 4
    max_len: int = 1024
    seed: int = 0

    def __post_init__(self) -> None:
        if self.heads < 1 or self.dim % self.heads:
            raise ValueError(f"dim {self.dim} not divisible by heads {self.heads}")
        if self.max_len < 2:
            raise ValueError("max_len must be at least 2")
        if self.vocab_size < 2 or self.layers < 0:
            raise ValueError("invalid vocab_size or layers")

    def to_dict(self) -> dict:
        return asdict(self)


class CausalSelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.qkv = nn.Linear(dim, 3 * dim)
        self.proj = nn.Linear(dim, dim)

    def forward(self, x: Tensor, cache: list[Tensor] | None = None) -> Tensor:
        """``cache`` holds ``[k, v]`` for earlier positions and is extended in place."""
        b, t, d = x.shape
        h = self.heads
        q, k, v = self.qkv(x).split(d, dim=2)
        q = q.view(b, t, h, d // h).transpose(1, 2)
        k = k.view(b, t, h, d // h).transpose(1, 2)
        v = v.view(b, t, h, d // h).transpose(1, 2)
        past = 0
        if cache is not None:
            if cache:
                past = cache[0].shape[2]
                k = torch.cat([cache[0], k], dim=2)
                v = torch.cat([cache[1], v], dim=2)
            cache[:] = [k, v]
        att = (q @ k.transpose(-2, -1)) / math.sqrt(d // h)
        future = torch.ones(t, past + t, dtype=torch.bool, device=x.device).triu(past + 1)
        att = att.masked_fill(future, float("-inf"))
        y = F.softmax(att, dim=-1) @ v
        return self.proj(y.transpose(1, 2).reshape(b, t, d))


class Block(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = CausalSelfAttention(dim, heads)
        self.ln2 = nn.LayerNorm(dim)
        self.fc1 = nn.Linear(dim, 4 * dim)
        self.fc2 = nn.Linear(4 * dim, dim)

    def forward(self, x: Tensor, cache: list[Tensor] | None = None) -> Tensor:
        x = x + self.attn(self.ln1(x), cache)
        return x + self.fc2(F.gelu(self.fc1(self.ln2(x))))


class Transformer(nn.Module):
    """Pre-norm GPT-style model with learned absolute positions.

    The output projection is stored as ``head`` with shape ``[dim, vocab]``
    so vocabulary rows live in ``tok_emb[i]`` and ``head[:, i]``.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c = config
        self.tok_emb = nn.Parameter(torch.empty(c.vocab_size, c.dim))
        self.pos_emb = nn.Parameter(torch.empty(c.max_len, c.dim))
        self.blocks = nn.ModuleList(Block(c.dim, c.heads) for _ in range(c.layers))
        self.ln_f = nn.LayerNorm(c.dim)
        self.head = nn.Parameter(torch.empty(c.dim, c.vocab_size))
        self.reset_parameters(c.seed)

    def reset_parameters(self, seed: int) -> None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            for name, p in self.named_parameters():
                if name.endswith("bias"):
                    p.zero_()
                elif ".ln" in name or name.startswith("ln_"):
                    p.fill_(1.0)
                else:
                    p.copy_(torch.randn(p.shape, generator=gen, dtype=torch.float64) * INIT_STD)

    def check_ids(self, ids: Tensor, offset: int = 0) -> None:
        if ids.dim() != 2:
            raise ValueError(f"expected [batch, length] token ids, got shape {tuple(ids.shape)}")
        if offset + ids.shape[1] > self.config.max_len:
            raise ValueError(f"sequence length {offset + ids.shape[1]} exceeds max_len {self.config.max_len}")
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.config.vocab_size):
            raise ValueError(f"token id outside [0, {self.config.vocab_size})")

    def forward(self, ids: Tensor, caches: list[list[Tensor]] | None = None) -> Tensor:
        """Logits ``[B, L, V]`` for ids ``[B, L]``.

        With ``caches`` (one list per block, initially empty) the ids are
        treated as a continuation of whatever the caches already hold.
        """
        offset = caches[0][0].shape[2] if caches and caches[0] else 0
        self.check_ids(ids, offset)
        pos = torch.arange(offset, offset + ids.shape[1], device=ids.device)
        x = self.tok_emb[ids] + self.pos_emb[pos]
        for i, block in enumerate(self.blocks):
            x = block(x, caches[i] if caches is not None else None)
        return self.ln_f(x) @ self.head

    def new_caches(self) -> list[list[Tensor]]:
        return [[] for _ in self.blocks]

    def n_params(self) -> int:
        return sum(p.numel() for p in self.parameters())
