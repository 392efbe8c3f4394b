from dataclasses import replace

import numpy as np
import pytest
from hypothesis import strategies as st

from ctrlmusic.codec import GrammarError, Variant, advance
from ctrlmusic.score import Note, Song, Track, default_tables, quantize_and_sort
from ctrlmusic.synthetic import random_song


def song_of(*tracks, tags=(), spm=48):
    """Build a song from ``(program, [(onset, pitch, duration), ...])`` pairs."""
    drum = default_tables().drum_program
    out = tuple(
        Track(program=p, is_drum=p == drum, notes=tuple(Note(o, pi, d) for o, pi, d in notes))
        for p, notes in tracks
    )
    return Song(tracks=out, genre_tags=tuple(tags), has_metadata=bool(tags), steps_per_measure=spm)


@st.composite
def songs(draw, unnormalized=False, with_tags=True):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_song(np.random.default_rng(seed), max_notes=12, unnormalized=unnormalized, with_tags=with_tags)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def visible(song: Song, variant: Variant) -> Song:
    """What a variant's token stream can carry of a song."""
    song = quantize_and_sort(song)
    if not variant.has_tags:
        song = replace(song, genre_tags=(), has_metadata=False)
    return song


def accepts_by_advance(state, event) -> bool:
    try:
        advance(state, event)
    except GrammarError:
        return False
    return True


_CRITERIA = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(name, ok, detail)``.

    Lines are printed immediately and repeated in the terminal summary.
    """
    lines = request.config.stash.setdefault(_CRITERIA, [])

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
