"""Corpus-to-checkpoint plumbing shared by the CLI and the acceptance tests."""

from __future__ import annotations

from typing import Any, Callable, Mapping, Sequence

from .codec import Variant, encode
from .dataset import CorpusEntry, Subset, filter_subset, split
from .neural import ModelConfig, OptimizerConfig, finetune_init, init_model, train, truncate_ids
from .neural.checkpoint import ModelCheckpoint
from .neural.training import LogRow
from .vocab import Vocabulary

TRAINING_SUBSET = {
    Variant.UNCOND: Subset.FULL,
    Variant.MMT_I: Subset.METADATA,
    Variant.MMT_G: Subset.GENRE,
    Variant.MMT_GI: Subset.GENRE,
}


def encode_corpus(entries: Sequence[CorpusEntry], variant: Variant, vocab: Vocabulary, max_len: int) -> list[list[int]]:
    return [truncate_ids(vocab.ids_of(encode(e.song, variant)), vocab, max_len) for e in entries]


def split_tokens(entries, variant: Variant, vocab: Vocabulary, max_len: int, seed: int):
    entries = filter_subset(entries, TRAINING_SUBSET[variant])
    if not entries:
        raise ValueError(f"no songs in the {TRAINING_SUBSET[variant].value} subset")
    train_e, valid_e, _ = split(entries, seed)
    if not valid_e:
        # tiny corpora can hash nothing into valid; borrow from train
        valid_e = train_e[-max(1, len(train_e) // 20):]
    return encode_corpus(train_e, variant, vocab, max_len), encode_corpus(valid_e, variant, vocab, max_len)


def model_config(cfg: Mapping[str, Any], vocab_size: int, seed: int) -> ModelConfig:
    return ModelConfig(
        vocab_size=vocab_size, dim=cfg["dim"], heads=cfg["heads"], layers=cfg["layers"], max_len=cfg["max_len"], seed=seed
    )


def optimizer_config(cfg: Mapping[str, Any], stage: str) -> OptimizerConfig:
    return OptimizerConfig(
        lr0=cfg[f"{stage}_lr"],
        beta1=cfg["beta1"],
        beta2=cfg["beta2"],
        weight_decay=cfg["weight_decay"],
        decay_steps=cfg["decay_steps"],
    )


def pretrain(
    entries: Sequence[CorpusEntry],
    cfg: Mapping[str, Any],
    steps: int,
    seed: int,
    on_log: Callable[[LogRow], None] | None = None,
) -> tuple[ModelCheckpoint, list[LogRow]]:
    variant = Variant.UNCOND
    vocab = variant.vocab()
    train_seqs, valid_seqs = split_tokens(entries, variant, vocab, cfg["max_len"], seed)
    ckpt = init_model(model_config(cfg, len(vocab), seed), optimizer_config(cfg, "pretrain"), vocab.fingerprint, variant.value)
    rows = train(ckpt, train_seqs, valid_seqs, steps, cfg["pretrain_batch_size"], seed, cfg["valid_interval"], on_log)
    return ckpt, rows


def finetune(
    pretrained: ModelCheckpoint,
    entries: Sequence[CorpusEntry],
    variant: Variant,
    cfg: Mapping[str, Any],
    steps: int,
    seed: int,
    on_log: Callable[[LogRow], None] | None = None,
) -> tuple[ModelCheckpoint, list[LogRow]]:
    base = Variant.parse(pretrained.variant).vocab()
    target = variant.vocab()
    ckpt = finetune_init(pretrained, base, target, seed, variant.value, optimizer_config(cfg, "finetune"))
    train_seqs, valid_seqs = split_tokens(entries, variant, target, ckpt.config.max_len, seed)
    rows = train(ckpt, train_seqs, valid_seqs, steps, cfg["finetune_batch_size"], seed, cfg["valid_interval"], on_log)
    return ckpt, rows
