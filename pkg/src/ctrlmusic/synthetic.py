"""Small rule-based songs for demos, smoke tests and desk-scale training.

The songs are not music anyone would listen to, but they carry the kind of
structure a model can pick up quickly: a key, a repeated rhythm per track,
and a genre that decides which instruments appear.
"""

from __future__ import annotations

import numpy as np

from .metrics import MAJOR, NATURAL_MINOR
from .score import RESOLUTION, Note, Song, Track, default_tables, quantize_and_sort

# genre id -> instrument ids it draws from
_STYLES = {
    0: (0, 24, 26, 49),   # classical: piano, violin, cello, flute
    1: (0, 19, 21, 63),   # pop: piano, electric guitar, electric bass, drums
    2: (19, 21, 63),      # rock
    5: (0, 20, 41, 63),   # jazz: piano, bass, alto sax, drums
}

_RHYTHMS = (
    (0, 12, 24, 36),
    (0, 6, 12, 24, 30, 36),
    (0, 18, 24, 36, 42),
    (0, 24),
    (0, 12, 18, 24, 36),
)


def toy_song(rng: np.random.Generator, n_measures: int | None = None) -> Song:
    tables = default_tables()
    genre = int(rng.choice(list(_STYLES)))
    pool = _STYLES[genre]
    n_tracks = int(rng.integers(1, min(3, len(pool)) + 1))
    programs = sorted(int(p) for p in rng.choice(pool, size=n_tracks, replace=False))
    root = int(rng.integers(0, 12))
    scale = MAJOR if rng.random() < 0.6 else NATURAL_MINOR
    measures = n_measures or int(rng.integers(2, 7))
    bar = 4 * RESOLUTION

    tracks = []
    for program in programs:
        rhythm = _RHYTHMS[int(rng.integers(len(_RHYTHMS)))]
        is_drum = program == tables.drum_program
        base = 36 if program in (20, 21) else 60
        degree = int(rng.integers(0, 7))
        notes = []
        for m in range(measures):
            for i, step in enumerate(rhythm):
                nxt = rhythm[i + 1] if i + 1 < len(rhythm) else bar
                if is_drum:
                    pitch = (36, 38, 42)[i % 3]
                else:
                    degree = int(np.clip(degree + rng.integers(-2, 3), 0, 13))
                    octave, d = divmod(degree, 7)
                    pitch = base + root + scale[d] + 12 * octave
                notes.append(Note(onset=m * bar + step, pitch=pitch, duration=nxt - step))
        tracks.append(Track(program=program, is_drum=is_drum, notes=tuple(notes)))

    tagged = rng.random() < 0.7
    has_meta = tagged or rng.random() < 0.5
    return quantize_and_sort(
        Song(tracks=tuple(tracks), genre_tags=(genre,) if tagged else (), has_metadata=has_meta)
    )


def toy_corpus(n: int, seed: int = 0) -> list[Song]:
    rng = np.random.default_rng(seed)
    return [toy_song(rng) for _ in range(n)]


def random_song(
    rng: np.random.Generator,
    max_notes: int = 40,
    max_tracks: int = 4,
    with_tags: bool = True,
    unnormalized: bool = False,
) -> Song:
    """Unstructured random song covering the full value ranges.

    With ``unnormalized`` notes may fall past beat 63, durations may exceed
    the clip ceiling and tracks may repeat a program.
    """
    tables = default_tables()
    n_tracks = int(rng.integers(0, max_tracks + 1))
    if unnormalized:
        programs = [int(p) for p in rng.integers(0, 64, size=n_tracks)]
    else:
        programs = sorted(int(p) for p in rng.choice(64, size=n_tracks, replace=False))
    onset_hi = 80 * RESOLUTION if unnormalized else 64 * RESOLUTION
    dur_hi = 400 if unnormalized else 193
    tracks = []
    for p in programs:
        k = int(rng.integers(0, max_notes + 1))
        notes = tuple(
            Note(int(o), int(pi), int(d))
            for o, pi, d in zip(
                rng.integers(0, onset_hi, size=k),
                rng.integers(0, 128, size=k),
                rng.integers(1, dur_hi, size=k),
            )
        )
        tracks.append(Track(program=p, is_drum=p == tables.drum_program, notes=notes))
    tags: tuple[int, ...] = ()
    if with_tags:
        k = int(rng.integers(1, 4))
        tags = tuple(sorted(int(t) for t in rng.choice(20, size=k, replace=False)))
    return Song(tracks=tuple(tracks), genre_tags=tags, has_metadata=bool(tags))
