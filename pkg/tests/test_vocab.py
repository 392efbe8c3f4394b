import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctrlmusic import vocab as V
from ctrlmusic.vocab import Kind, Vocabulary, VocabError, build_vocab, extend_vocab


def test_full_vocabulary_size_and_layout():
    vocab = build_vocab(True, True)
    assert len(vocab) == 1 + 5 + 64 + 12 + 128 + 192 + 64 + 20 == 486
    assert vocab.entries[:6] == (V.PAD, V.SOS, V.SOT, V.SOP, V.SON, V.EOS)
    assert vocab.entries[6] == V.beat(0)
    assert vocab.entries[-1] == V.tag(19)


def test_unconditional_vocabulary_size():
    # instrument events stay: every note names its instrument
    vocab = build_vocab(False, False)
    kinds = [e.kind for e in vocab.entries]
    assert len(vocab) == 1 + 3 + 64 + 12 + 128 + 192 + 64 == 464
    assert Kind.SOT not in kinds and Kind.SOP not in kinds and Kind.TAG not in kinds
    assert kinds.count(Kind.INSTRUMENT) == 64


def test_instrument_only_vocabulary_has_program_marker_only():
    vocab = build_vocab(False, True)
    assert V.SOP in vocab
    assert V.SOT not in vocab


@pytest.mark.parametrize("tags,instr", [(False, False), (False, True), (True, False), (True, True)])
def test_ids_round_trip(tags, instr):
    vocab = build_vocab(tags, instr)
    assert all(vocab.index[e] == i for i, e in enumerate(vocab.entries))
    assert vocab.entries[0] == V.PAD


def test_fingerprint_is_deterministic_and_distinct():
    a = Vocabulary(build_vocab(True, True).entries)
    assert a.fingerprint == build_vocab(True, True).fingerprint
    prints = {build_vocab(t, i).fingerprint for t in (False, True) for i in (False, True)}
    assert len(prints) == 4


def test_text_round_trip():
    vocab = build_vocab(True, False)
    text = vocab.to_text()
    assert text.splitlines()[0] == f"# vocab fingerprint {vocab.fingerprint} version 1"
    assert text.splitlines()[1] == "0 pad 0"
    again = Vocabulary.from_text(text)
    assert again.entries == vocab.entries and again.fingerprint == vocab.fingerprint


def test_text_with_wrong_fingerprint_rejected():
    text = build_vocab(False, False).to_text().replace("fingerprint ", "fingerprint 0000", 1)
    with pytest.raises(VocabError):
        Vocabulary.from_text(text)


def test_extend_uncond_to_full():
    base, target = build_vocab(False, False), build_vocab(True, True)
    id_map = extend_vocab(base, target)
    new = {target.entries[t] for t, b in enumerate(id_map) if b is None}
    assert new == {V.SOT, V.SOP} | {V.tag(i) for i in range(20)}
    for t, b in enumerate(id_map):
        if b is not None:
            assert base.entries[b] == target.entries[t]
    shared = [b for b in id_map if b is not None]
    assert len(shared) == len(set(shared)) == len(base)


def test_extend_identity():
    vocab = build_vocab(False, True)
    assert extend_vocab(vocab, vocab) == list(range(len(vocab)))


def test_extend_shrink_rejected():
    with pytest.raises(VocabError, match="vocabulary shrink not supported"):
        extend_vocab(build_vocab(True, True), build_vocab(False, True))


@given(st.randoms(use_true_random=False))
def test_extend_matches_by_value_not_position(rnd):
    base = build_vocab(False, False)
    rest = list(base.entries[1:])
    rnd.shuffle(rest)
    permuted = Vocabulary((V.PAD, *rest))
    target = build_vocab(True, True)
    plain, perm = extend_vocab(base, target), extend_vocab(permuted, target)
    assert [b is None for b in plain] == [b is None for b in perm]
    for t, b in enumerate(perm):
        if b is not None:
            assert permuted.entries[b] == target.entries[t]


def test_event_argument_ranges():
    with pytest.raises(ValueError):
        V.duration(0)
    with pytest.raises(ValueError):
        V.position(12)
    with pytest.raises(ValueError):
        V.tag(20)
    assert V.duration(192).arg == 192


def test_kind_table_on_permuted_layout():
    base = build_vocab(False, False)
    rest = list(reversed(base.entries[1:]))
    permuted = Vocabulary((V.PAD, *rest))
    ids, args = permuted.kind_table(Kind.BEAT)
    assert sorted(args.tolist()) == list(range(64))
    assert all(permuted.entries[i] == V.beat(a) for i, a in zip(ids, args))
    assert permuted.kind_table(Kind.TAG)[0].size == 0
