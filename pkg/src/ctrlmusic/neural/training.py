"""Next-token training: loss, AdamW steps, batching, and vocabulary-extension init."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F

from ..vocab import SON, Vocabulary, extend_vocab
from .checkpoint import ModelCheckpoint
from .optim import OptimizerConfig
from .model import INIT_STD, Transformer

logger = logging.getLogger(__name__)

PAD_ID = 0


class TrainingError(RuntimeError):
    pass


def _as_ids(ids) -> torch.Tensor:
    if isinstance(ids, torch.Tensor):
        return ids.long()
    return torch.as_tensor(np.asarray(ids), dtype=torch.long)


def sequence_loss(model: Transformer, ids) -> torch.Tensor:
    """Mean cross-entropy of each next token, over non-pad targets."""
    ids = _as_ids(ids)
    if ids.dim() != 2 or ids.shape[1] < 2:
        raise ValueError("need [batch, length >= 2] token ids")
    targets = ids[:, 1:]
    if not bool((targets != PAD_ID).any()):
        raise ValueError("all targets are padding")
    logits = model(ids[:, :-1])
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=PAD_ID)


def loss_and_grads(model: Transformer, ids) -> tuple[float, dict[str, torch.Tensor]]:
    model.zero_grad(set_to_none=True)
    loss = sequence_loss(model, ids)
    loss.backward()
    grads = {n: p.grad.detach().clone() for n, p in model.named_parameters()}
    return float(loss.detach()), grads


def train_step(ckpt: ModelCheckpoint, batch) -> float:
    """One AdamW update at ``lr_at(ckpt.step)``; returns the pre-update loss.

    A non-finite loss raises before any parameter is touched.
    """
    model = ckpt.model
    model.train()
    model.zero_grad(set_to_none=True)
    loss = sequence_loss(model, batch)
    value = float(loss.detach())
    if not math.isfinite(value):
        raise TrainingError(f"non-finite loss {value} at step {ckpt.step}; training halted")
    loss.backward()
    ckpt.set_lr()
    ckpt.optimizer.step()
    ckpt.step += 1
    return value


@torch.no_grad()
def mean_loss(model: Transformer, sequences: Sequence[Sequence[int]], batch_size: int = 16) -> float:
    """Token-weighted mean next-token loss over ``sequences``."""
    model.eval()
    total, count = 0.0, 0
    for i in range(0, len(sequences), batch_size):
        ids = _as_ids(pad_batch(sequences[i:i + batch_size]))
        targets = ids[:, 1:]
        logits = model(ids[:, :-1])
        losses = F.cross_entropy(
            logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=PAD_ID, reduction="sum"
        )
        total += float(losses)
        count += int((targets != PAD_ID).sum())
    if not count:
        raise ValueError("no non-pad targets")
    return total / count


def pad_batch(sequences: Sequence[Sequence[int]]) -> np.ndarray:
    width = max(len(s) for s in sequences)
    out = np.full((len(sequences), width), PAD_ID, dtype=np.int64)
    for i, s in enumerate(sequences):
        out[i, :len(s)] = s
    return out


def truncate_ids(ids: Sequence[int], vocab: Vocabulary, max_len: int) -> list[int]:
    """Cut an over-long sequence at a note-group boundary.

    The condition prefix (through start-of-notes) is always kept; whole
    note groups are kept while they fit; end-of-song is kept only if the
    complete song fits.
    """
    ids = list(ids)
    if len(ids) <= max_len:
        return ids
    son = ids.index(vocab.id_of(SON))
    if son + 1 > max_len:
        raise ValueError(f"condition prefix of {son + 1} tokens exceeds max_len {max_len}")
    groups = (max_len - son - 1) // 5
    return ids[:son + 1 + 5 * groups]


class BatchStream:
    """Seed-determined epochs of shuffled mini-batches."""

    def __init__(self, sequences: Sequence[Sequence[int]], batch_size: int, seed: int):
        if not sequences:
            raise ValueError("no training sequences")
        self.sequences = list(sequences)
        self.batch_size = min(batch_size, len(self.sequences))
        self.rng = np.random.default_rng(seed)
        self._order: list[int] = []

    def __next__(self) -> np.ndarray:
        if len(self._order) < self.batch_size:
            self._order += self.rng.permutation(len(self.sequences)).tolist()
        pick, self._order = self._order[:self.batch_size], self._order[self.batch_size:]
        return pad_batch([self.sequences[i] for i in pick])

    def __iter__(self):
        return self


@dataclass
class LogRow:
    step: int
    lr: float
    train_loss: float
    valid_loss: float | None

    def tsv(self) -> str:
        valid = "nan" if self.valid_loss is None else f"{self.valid_loss:.6f}"
        return f"{self.step}\t{self.lr:.8g}\t{self.train_loss:.6f}\t{valid}"


LOG_HEADER = "step\tlr\ttrain_loss\tvalid_loss"


def train(
    ckpt: ModelCheckpoint,
    train_seqs: Sequence[Sequence[int]],
    valid_seqs: Sequence[Sequence[int]],
    steps: int,
    batch_size: int,
    seed: int,
    valid_interval: int = 500,
    on_log: Callable[[LogRow], None] | None = None,
) -> list[LogRow]:
    """Run ``steps`` updates; log at step 0, every ``valid_interval`` and at the end.

    ``train_loss`` in a row is the mean batch loss since the previous row.
    """
    stream = BatchStream(train_seqs, batch_size, seed)
    torch.manual_seed(seed)
    rows: list[LogRow] = []
    window: list[float] = []

    def log(train_loss: float) -> None:
        valid = mean_loss(ckpt.model, valid_seqs) if valid_seqs else None
        row = LogRow(ckpt.step, ckpt.set_lr(), train_loss, valid)
        rows.append(row)
        logger.info("step %d lr %.3g train %.4f valid %s", row.step, row.lr, row.train_loss, row.valid_loss)
        if on_log:
            on_log(row)

    log(mean_loss(ckpt.model, train_seqs[: 4 * batch_size]))
    for i in range(steps):
        window.append(train_step(ckpt, next(stream)))
        if (i + 1) % valid_interval == 0 or i + 1 == steps:
            log(float(np.mean(window)))
            window = []
    return rows


def finetune_init(
    pretrained: ModelCheckpoint,
    base_vocab: Vocabulary,
    target_vocab: Vocabulary,
    seed: int,
    variant: str | None = None,
    opt: OptimizerConfig | None = None,
) -> ModelCheckpoint:
    """Grow a pretrained model to ``target_vocab``.

    Embedding rows and output-projection columns of events present in
    ``base_vocab`` are copied exactly; new events get N(0, 0.02) values
    from ``seed``. Everything else is copied; optimizer state and step reset.
    """
    if pretrained.vocab_fingerprint != base_vocab.fingerprint:
        raise TrainingError("checkpoint/vocabulary mismatch")
    if pretrained.config.vocab_size != len(base_vocab):
        raise TrainingError("checkpoint/vocabulary mismatch")
    id_map = extend_vocab(base_vocab, target_vocab)
    old = pretrained.model
    config = replace(old.config, vocab_size=len(target_vocab))
    model = Transformer(config)

    new_ids = [t for t, b in enumerate(id_map) if b is None]
    shared_t = torch.tensor([t for t, b in enumerate(id_map) if b is not None], dtype=torch.long)
    shared_b = torch.tensor([b for b in id_map if b is not None], dtype=torch.long)
    gen = torch.Generator().manual_seed(seed)
    dim = config.dim
    with torch.no_grad():
        src = dict(old.named_parameters())
        for name, p in model.named_parameters():
            if name not in ("tok_emb", "head"):
                p.copy_(src[name])
        model.tok_emb.zero_()
        model.head.zero_()
        model.tok_emb[shared_t] = old.tok_emb[shared_b]
        model.head[:, shared_t] = old.head[:, shared_b]
        if new_ids:
            idx = torch.tensor(new_ids, dtype=torch.long)
            emb = torch.randn(len(new_ids), dim, generator=gen, dtype=torch.float64) * INIT_STD
            out = torch.randn(dim, len(new_ids), generator=gen, dtype=torch.float64) * INIT_STD
            model.tok_emb[idx] = emb.to(model.tok_emb.dtype)
            model.head[:, idx] = out.to(model.head.dtype)
    return ModelCheckpoint(model, opt or pretrained.opt, target_vocab.fingerprint, variant or pretrained.variant, 0)
