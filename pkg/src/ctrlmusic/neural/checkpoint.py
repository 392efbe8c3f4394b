"""Model + optimizer state bundle and its binary file format.

File layout (all integers little-endian)::

    8 bytes   magic b"CTRLMCK\\0"
    u32       format version
    u32       header length N
    N bytes   UTF-8 JSON header (sorted keys): configs, step, vocab
              fingerprint, variant, tensor names and shapes
    ...       float32 parameters in header order, then first moments,
              then second moments, each in the same order
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .model import ModelConfig, Transformer
from .optim import AdamW, OptimizerConfig, decays, lr_at

MAGIC = b"CTRLMCK\0"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class ModelCheckpoint:
    model: Transformer
    opt: OptimizerConfig
    vocab_fingerprint: str
    variant: str = "uncond"
    step: int = 0
    optimizer: AdamW = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.optimizer = make_optimizer(self.model, self.opt, self.step)

    @property
    def config(self) -> ModelConfig:
        return self.model.config

    def moments(self) -> list[tuple[str, torch.Tensor, torch.Tensor]]:
        out = []
        for name, p in self.model.named_parameters():
            st = self.optimizer.state.get(p, {})
            m = st.get("exp_avg", torch.zeros_like(p))
            v = st.get("exp_avg_sq", torch.zeros_like(p))
            out.append((name, m, v))
        return out

    def reset_optimizer(self, step: int = 0) -> None:
        self.step = step
        self.optimizer = make_optimizer(self.model, self.opt, step)

    def set_lr(self) -> float:
        lr = lr_at(self.step, self.opt)
        for group in self.optimizer.param_groups:
            group["lr"] = lr
        return lr


def make_optimizer(model: Transformer, opt: OptimizerConfig, step: int = 0) -> AdamW:
    named = list(model.named_parameters())
    groups = [
        {"params": [p for n, p in named if decays(n, p)], "weight_decay": opt.weight_decay},
        {"params": [p for n, p in named if not decays(n, p)], "weight_decay": 0.0},
    ]
    optimizer = AdamW(groups, lr=lr_at(step, opt), betas=(opt.beta1, opt.beta2), eps=opt.eps)
    for group in optimizer.param_groups:
        group["step"] = step
    return optimizer


def init_model(
    config: ModelConfig, opt: OptimizerConfig | None = None, vocab_fingerprint: str = "", variant: str = "uncond"
) -> ModelCheckpoint:
    """Fresh model with N(0, 0.02) weights from ``config.seed``, zero biases, step 0."""
    return ModelCheckpoint(Transformer(config), opt or OptimizerConfig(), vocab_fingerprint, variant)


def _header(ckpt: ModelCheckpoint) -> dict:
    return {
        "model": ckpt.config.to_dict(),
        "optimizer": ckpt.opt.to_dict(),
        "step": ckpt.step,
        "vocab_fingerprint": ckpt.vocab_fingerprint,
        "variant": ckpt.variant,
        "tensors": [[n, list(p.shape)] for n, p in ckpt.model.named_parameters()],
    }


def to_bytes(ckpt: ModelCheckpoint) -> bytes:
    header = json.dumps(_header(ckpt), sort_keys=True, separators=(",", ":")).encode()
    chunks = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(header)), header]
    moments = ckpt.moments()
    for tensors in (
        [p for _, p in ckpt.model.named_parameters()],
        [m for _, m, _ in moments],
        [v for _, _, v in moments],
    ):
        for t in tensors:
            chunks.append(t.detach().cpu().numpy().astype("<f4", copy=False).tobytes())
    return b"".join(chunks)


def from_bytes(data: bytes) -> ModelCheckpoint:
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(data) < 16:
        raise CheckpointError("truncated checkpoint")
    version, hlen = struct.unpack_from("<II", data, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(data[16:16 + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from None
    config = ModelConfig(**header["model"])
    ckpt = ModelCheckpoint(
        Transformer(config),
        OptimizerConfig(**header["optimizer"]),
        header["vocab_fingerprint"],
        header["variant"],
        header["step"],
    )
    named = dict(ckpt.model.named_parameters())
    expected = [[n, list(p.shape)] for n, p in named.items()]
    if header["tensors"] != expected:
        raise CheckpointError("checkpoint tensors do not match the model config")

    offset = 16 + hlen

    def take(shape: list[int]) -> torch.Tensor:
        nonlocal offset
        count = int(np.prod(shape, dtype=np.int64))
        if offset + 4 * count > len(data):
            raise CheckpointError("truncated checkpoint")
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=offset).reshape(shape)
        offset += 4 * count
        return torch.from_numpy(arr.astype(np.float32))

    with torch.no_grad():
        for name, shape in expected:
            named[name].copy_(take(shape))
        firsts = [take(shape) for _, shape in expected]
        seconds = [take(shape) for _, shape in expected]
    if offset != len(data):
        raise CheckpointError("trailing bytes in checkpoint")
    for (name, _), m, v in zip(expected, firsts, seconds):
        ckpt.optimizer.state[named[name]] = {"exp_avg": m, "exp_avg_sq": v}
    return ckpt


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    Path(path).write_bytes(to_bytes(ckpt))


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    return from_bytes(Path(path).read_bytes())
