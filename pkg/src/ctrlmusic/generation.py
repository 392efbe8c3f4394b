"""Grammar-masked conditional sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .codec import GrammarState, Variant, advance, allowed_mask, decode, prefix_events
from .neural.checkpoint import ModelCheckpoint
from .score import N_GENRES, N_INSTRUMENTS, Song
from .vocab import EOS, PAD, Vocabulary


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenerationCondition:
    variant: Variant
    tags: tuple[int, ...] = ()
    programs: tuple[int, ...] = ()
    enforce_condition: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "tags", tuple(sorted(set(self.tags))))
        object.__setattr__(self, "programs", tuple(sorted(set(self.programs))))
        if self.variant.has_tags and not self.tags:
            raise ValueError(f"variant {self.variant.value} needs at least one genre tag")
        if self.variant.has_programs and not self.programs:
            raise ValueError(f"variant {self.variant.value} needs at least one program")
        if any(not 0 <= t < N_GENRES for t in self.tags):
            raise ValueError("genre tag out of range")
        if any(not 0 <= p < N_INSTRUMENTS for p in self.programs):
            raise ValueError("program out of range")


@dataclass(frozen=True)
class SamplingConfig:
    temperature: float = 1.0
    top_k: int = 20
    max_tokens: int = 1024
    seed: int = 0

    def __post_init__(self) -> None:
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 1 <= self.max_tokens <= 1024:
            raise ValueError("max_tokens must lie in [1, 1024]")


def build_prefix(cond: GenerationCondition):
    return prefix_events(cond.variant, cond.tags, cond.programs)


def sample_token(logits, mask: np.ndarray, cfg: SamplingConfig, rng: np.random.Generator) -> int:
    """Draw one id: mask, keep the ``top_k`` best survivors, softmax at temperature."""
    logits = np.asarray(logits, dtype=np.float64)
    allowed = np.flatnonzero(mask)
    if allowed.size == 0:
        raise GenerationError("grammar dead end")
    order = np.argsort(-logits[allowed], kind="stable")
    keep = allowed[order[: cfg.top_k]]
    if keep.size == 1:
        return int(keep[0])
    z = logits[keep] / cfg.temperature
    p = np.exp(z - z.max())
    p /= p.sum()
    return int(keep[rng.choice(keep.size, p=p)])


@dataclass
class _Stream:
    rng: np.random.Generator
    state: GrammarState
    ids: list[int] = field(default_factory=list)
    finished: bool = False


@torch.no_grad()
def generate_batch(
    ckpt: ModelCheckpoint, vocab: Vocabulary, cond: GenerationCondition, cfg: SamplingConfig, n: int
) -> list[list[int]]:
    """``n`` independent streams sharing one batched forward pass per step.

    Stream ``i`` draws from its own generator spawned from ``cfg.seed``,
    so its output does not depend on which other streams ran beside it.
    """
    if ckpt.vocab_fingerprint != vocab.fingerprint:
        raise GenerationError("checkpoint/vocabulary mismatch")
    if n < 1:
        return []
    model = ckpt.model
    model.eval()
    prefix = build_prefix(cond)
    max_tokens = min(cfg.max_tokens, model.config.max_len)
    state = GrammarState.initial(cond.variant)
    for e in prefix:
        state = advance(state, e)
    prefix_ids = vocab.ids_of(prefix)
    seeds = np.random.SeedSequence(cfg.seed).spawn(n)
    streams = [_Stream(np.random.default_rng(s), state, list(prefix_ids[:max_tokens])) for s in seeds]
    if len(prefix_ids) >= max_tokens:
        return [s.ids for s in streams]

    caches = model.new_caches()
    feed = torch.tensor([prefix_ids] * n, dtype=torch.long)
    pad_id, eos_id = vocab.id_of(PAD), vocab.id_of(EOS)
    while True:
        logits = model(feed, caches)[:, -1, :].double().numpy()
        nxt = []
        for s, row in zip(streams, logits):
            if s.finished:
                nxt.append(pad_id)
                continue
            mask = allowed_mask(s.state, vocab, cond.enforce_condition)
            tok = sample_token(row, mask, cfg, s.rng)
            s.state = advance(s.state, vocab.entries[tok])
            s.ids.append(tok)
            s.finished = tok == eos_id or len(s.ids) >= max_tokens
            nxt.append(tok)
        if all(s.finished for s in streams):
            return [s.ids for s in streams]
        feed = torch.tensor(nxt, dtype=torch.long).unsqueeze(1)


def generate(ckpt: ModelCheckpoint, vocab: Vocabulary, cond: GenerationCondition, cfg: SamplingConfig) -> list[int]:
    return generate_batch(ckpt, vocab, cond, cfg, 1)[0]


def decode_generated(ids: Sequence[int], vocab: Vocabulary, variant: Variant) -> Song:
    """Decode sampler output, tolerating a missing end-of-song or a cut-off note group."""
    return decode(vocab.events_of(ids), variant, strict=False)


def adheres(song: Song, cond: GenerationCondition) -> bool:
    """True when every note of ``song`` uses one of the conditioned programs."""
    if not cond.variant.has_programs:
        return True
    allowed = set(cond.programs)
    return all(t.program in allowed for t in song.tracks)
