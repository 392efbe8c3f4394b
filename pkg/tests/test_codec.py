import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctrlmusic import vocab as V
from ctrlmusic.codec import (
    CodecError,
    GrammarError,
    GrammarState,
    Section,
    Variant,
    advance,
    allowed_mask,
    check_sequence,
    decode,
    encode,
    expected_length,
    read_token_file,
    write_token_file,
)
from ctrlmusic.score import Song, quantize_and_sort
from ctrlmusic.vocab import Kind

from conftest import accepts_by_advance, song_of, songs, visible

TWO_NOTES = song_of((0, [(0, 60, 12), (12, 64, 6)]), tags=[3])
BODY = [
    V.SON,
    V.beat(0), V.position(0), V.instrument(0), V.pitch(60), V.duration(12),
    V.beat(1), V.position(0), V.instrument(0), V.pitch(64), V.duration(6),
    V.EOS,
]


def test_encode_instrument_variant():
    assert encode(TWO_NOTES, Variant.MMT_I) == [V.SOS, V.SOP, V.instrument(0), *BODY]


def test_encode_genre_instrument_variant_puts_tags_first():
    assert encode(TWO_NOTES, Variant.MMT_GI) == [V.SOS, V.SOT, V.tag(3), V.SOP, V.instrument(0), *BODY]


def test_encode_genre_variant_and_uncond():
    assert encode(TWO_NOTES, Variant.MMT_G) == [V.SOS, V.SOT, V.tag(3), *BODY]
    assert encode(TWO_NOTES, Variant.UNCOND) == [V.SOS, *BODY]


def test_encode_empty_song():
    assert encode(Song(), Variant.UNCOND) == [V.SOS, V.SON, V.EOS]


def test_encode_missing_genre():
    with pytest.raises(CodecError, match="missing genre condition"):
        encode(song_of((0, [(0, 60, 12)])), Variant.MMT_GI)


def test_encode_position_is_onset_minus_beat_start():
    events = encode(song_of((0, [(29, 60, 1)])), Variant.UNCOND)
    assert events[2:4] == [V.beat(2), V.position(5)]


def test_multitrack_merge_order():
    song = song_of((40, [(0, 50, 6)]), (0, [(0, 70, 6), (0, 40, 6)]))
    events = encode(song, Variant.UNCOND)
    groups = [events[i:i + 5] for i in range(2, len(events) - 1, 5)]
    assert [(g[2].arg, g[3].arg) for g in groups] == [(0, 40), (0, 70), (40, 50)]


def test_decode_inverts_example():
    assert decode(encode(TWO_NOTES, Variant.MMT_I), Variant.MMT_I) == visible(TWO_NOTES, Variant.MMT_I)


def test_decode_reports_index_and_expected():
    with pytest.raises(GrammarError) as err:
        decode([V.SOS, V.SON, V.pitch(60)], Variant.UNCOND)
    assert err.value.index == 2
    assert err.value.allowed == {Kind.BEAT, Kind.EOS}


def test_tag_after_start_of_notes_rejected():
    seq = [V.SOS, V.SOT, V.tag(3), V.SOP, V.instrument(0), V.SON, V.tag(1)]
    with pytest.raises(GrammarError, match="tag outside tag section"):
        decode(seq, Variant.MMT_GI)


def test_decode_strict_requires_end():
    with pytest.raises(GrammarError):
        decode(encode(TWO_NOTES, Variant.UNCOND)[:-1], Variant.UNCOND)


def test_decode_lenient_drops_partial_group():
    events = encode(TWO_NOTES, Variant.UNCOND)[:-3]
    song = decode(events, Variant.UNCOND, strict=False)
    assert [n.pitch for n in song.tracks[0].notes] == [60]


def test_advance_tags_pending_after_sos():
    state = advance(GrammarState.initial(Variant.MMT_G), V.SOS)
    assert state.section is Section.EXPECT_SOT
    vocab = Variant.MMT_G.vocab()
    mask = allowed_mask(state, vocab)
    assert np.flatnonzero(mask).tolist() == [vocab.id_of(V.SOT)]


def test_advance_field_cycle():
    state = GrammarState(Variant.UNCOND, Section.NOTES, Kind.PITCH, last_beat=0)
    assert advance(state, V.pitch(60)).next_field is Kind.DURATION


def test_advance_rejects_backwards_beat():
    state = GrammarState(Variant.UNCOND, Section.NOTES, Kind.BEAT, last_beat=5)
    with pytest.raises(GrammarError) as err:
        advance(state, V.beat(3))
    assert Kind.BEAT in err.value.allowed
    assert advance(state, V.beat(5)).last_beat == 5


def test_tag_list_must_ascend():
    with pytest.raises(GrammarError):
        check_sequence([V.SOS, V.SOT, V.tag(4), V.tag(2)], Variant.MMT_G)


def test_mask_after_start_of_notes():
    vocab = Variant.UNCOND.vocab()
    state = check_sequence([V.SOS, V.SON], Variant.UNCOND)
    allowed = {vocab.entries[i] for i in np.flatnonzero(allowed_mask(state, vocab))}
    assert allowed == {V.beat(b) for b in range(64)} | {V.EOS}


def test_mask_restricts_instrument_to_declared():
    vocab = Variant.MMT_I.vocab()
    state = check_sequence(
        [V.SOS, V.SOP, V.instrument(0), V.instrument(40), V.SON, V.beat(0), V.position(0)], Variant.MMT_I
    )
    on = allowed_mask(state, vocab, enforce_condition=True)
    assert {vocab.entries[i] for i in np.flatnonzero(on)} == {V.instrument(0), V.instrument(40)}
    assert allowed_mask(state, vocab, enforce_condition=False).sum() == 64


def test_mask_done_state_all_false():
    vocab = Variant.MMT_GI.vocab()
    state = check_sequence(encode(TWO_NOTES, Variant.MMT_GI), Variant.MMT_GI)
    assert state.done
    assert not allowed_mask(state, vocab).any()


def test_token_file_round_trip(tmp_path):
    vocab = Variant.MMT_G.vocab()
    seqs = [vocab.ids_of(encode(TWO_NOTES, Variant.MMT_G)), [1, 2]]
    path = tmp_path / "tok.txt"
    write_token_file(path, vocab, seqs)
    assert path.read_text().splitlines()[0] == f"#vocab {vocab.fingerprint}"
    assert read_token_file(path, vocab) == seqs
    with pytest.raises(CodecError):
        read_token_file(path, Variant.UNCOND.vocab())


@pytest.mark.parametrize("variant", list(Variant))
@given(song=songs())
def test_round_trip(variant, song):
    assert decode(encode(song, variant), variant) == visible(song, variant)


@pytest.mark.parametrize("variant", list(Variant))
@given(song=songs())
def test_encoded_sequences_parse_and_obey_length_law(variant, song):
    events = encode(song, variant)
    assert check_sequence(events, variant).done
    norm = quantize_and_sort(song)
    n = 1 + 1 + 5 * norm.n_notes + 1
    if variant.has_tags:
        n += 1 + len(norm.genre_tags)
    if variant.has_programs:
        n += 1 + len(norm.tracks)
    assert len(events) == n == expected_length(song, variant)
    after = events[events.index(V.SON) + 1:]
    assert not any(e.kind in (Kind.TAG, Kind.SOT, Kind.SOP, Kind.SOS, Kind.SON) for e in after)


@pytest.mark.parametrize("variant", list(Variant))
def test_mask_agrees_with_advance_on_random_walk(variant):
    rng = np.random.default_rng(7)
    vocab = variant.vocab()
    state = GrammarState.initial(variant)
    for _ in range(300):
        accepted = np.array([accepts_by_advance(state, e) for e in vocab.entries])
        assert np.array_equal(allowed_mask(state, vocab, enforce_condition=False), accepted)
        enforced = allowed_mask(state, vocab, enforce_condition=True)
        assert not (enforced & ~accepted).any()
        if not accepted.any():
            state = GrammarState.initial(variant)
            continue
        state = advance(state, vocab.entries[int(rng.choice(np.flatnonzero(accepted)))])
