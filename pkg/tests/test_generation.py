import numpy as np
import pytest

from ctrlmusic.codec import Variant, check_sequence
from ctrlmusic.generation import (
    GenerationCondition,
    GenerationError,
    SamplingConfig,
    adheres,
    build_prefix,
    decode_generated,
    generate,
    generate_batch,
    sample_token,
)
from ctrlmusic.neural import ModelConfig, init_model
from ctrlmusic.vocab import EOS, SON, SOP, SOS, SOT, instrument, tag


def model_for(variant, seed=0):
    vocab = variant.vocab()
    return init_model(ModelConfig(len(vocab), dim=16, heads=2, layers=1, max_len=1024, seed=seed), vocab_fingerprint=vocab.fingerprint), vocab


def test_prefix_examples():
    cond = GenerationCondition(Variant.MMT_GI, tags=(7, 3), programs=(33, 0))
    assert build_prefix(cond) == [SOS, SOT, tag(3), tag(7), SOP, instrument(0), instrument(33), SON]
    assert build_prefix(GenerationCondition(Variant.UNCOND)) == [SOS, SON]
    assert build_prefix(GenerationCondition(Variant.MMT_G, tags=(2,))) == [SOS, SOT, tag(2), SON]
    assert build_prefix(GenerationCondition(Variant.MMT_I, programs=(5,))) == [SOS, SOP, instrument(5), SON]


def test_condition_validation():
    with pytest.raises(ValueError):
        GenerationCondition(Variant.MMT_G)
    with pytest.raises(ValueError):
        GenerationCondition(Variant.MMT_I, programs=(64,))


def test_top1_is_masked_argmax():
    logits = np.array([5.0, 1.0, 3.0, 4.0])
    mask = np.array([False, True, True, True])
    rng = np.random.default_rng(0)
    assert sample_token(logits, mask, SamplingConfig(top_k=1), rng) == 3


def test_masked_id_never_drawn():
    logits = np.zeros(6)
    logits[2] = 10.0
    mask = np.ones(6, dtype=bool)
    mask[2] = False
    rng = np.random.default_rng(1)
    cfg = SamplingConfig(top_k=6)
    draws = {sample_token(logits, mask, cfg, rng) for _ in range(100_000)}
    assert 2 not in draws
    assert draws == {0, 1, 3, 4, 5}


def test_top_k_limits_support():
    logits = np.arange(10, dtype=float)
    rng = np.random.default_rng(2)
    draws = {sample_token(logits, np.ones(10, bool), SamplingConfig(top_k=3), rng) for _ in range(2000)}
    assert draws == {7, 8, 9}


def test_dead_end():
    with pytest.raises(GenerationError, match="grammar dead end"):
        sample_token(np.zeros(4), np.zeros(4, bool), SamplingConfig(), np.random.default_rng(0))


def test_sampling_config_bounds():
    with pytest.raises(ValueError):
        SamplingConfig(temperature=0)
    with pytest.raises(ValueError):
        SamplingConfig(max_tokens=1025)


@pytest.mark.parametrize("variant", list(Variant))
def test_generation_is_grammatical(variant):
    ckpt, vocab = model_for(variant)
    cond = GenerationCondition(variant, tags=(1,) if variant.has_tags else (), programs=(0, 63) if variant.has_programs else ())
    for ids in generate_batch(ckpt, vocab, cond, SamplingConfig(max_tokens=120, seed=3), 3):
        events = vocab.events_of(ids)
        assert events[: len(build_prefix(cond))] == build_prefix(cond)
        if events[-1] == EOS:
            check_sequence(events, variant)
        song = decode_generated(ids, vocab, variant)
        assert adheres(song, cond)


def test_generation_seeded():
    ckpt, vocab = model_for(Variant.MMT_I)
    cond = GenerationCondition(Variant.MMT_I, programs=(0,))
    cfg = SamplingConfig(max_tokens=80, seed=11)
    a = generate(ckpt, vocab, cond, cfg)
    assert a == generate(ckpt, vocab, cond, cfg)
    assert generate_batch(ckpt, vocab, cond, cfg, 3)[0] == a


def test_single_program_adherence():
    ckpt, vocab = model_for(Variant.MMT_I, seed=4)
    cond = GenerationCondition(Variant.MMT_I, programs=(0,))
    for ids in generate_batch(ckpt, vocab, cond, SamplingConfig(max_tokens=200, seed=0), 4):
        song = decode_generated(ids, vocab, Variant.MMT_I)
        assert all(t.program == 0 for t in song.tracks)


def test_max_tokens_cap():
    ckpt, vocab = model_for(Variant.UNCOND)
    ids = generate(ckpt, vocab, GenerationCondition(Variant.UNCOND), SamplingConfig(max_tokens=16, seed=0))
    assert len(ids) <= 16
    assert vocab.events_of(ids)[:2] == [SOS, SON]


def test_vocab_mismatch():
    ckpt, _ = model_for(Variant.UNCOND)
    with pytest.raises(GenerationError, match="mismatch"):
        generate(ckpt, Variant.MMT_G.vocab(), GenerationCondition(Variant.MMT_G, tags=(0,)), SamplingConfig())


def test_enforce_off_allows_other_programs():
    # with the condition unenforced, an untrained model picks other instruments
    ckpt, vocab = model_for(Variant.MMT_I, seed=1)
    cond = GenerationCondition(Variant.MMT_I, programs=(0,), enforce_condition=False)
    songs = [decode_generated(ids, vocab, Variant.MMT_I) for ids in generate_batch(ckpt, vocab, cond, SamplingConfig(max_tokens=200, top_k=500), 4)]
    assert not all(adheres(s, cond) for s in songs)
