"""Quantized multitrack score: the value types every other module consumes.

Time is measured in integer steps at :data:`RESOLUTION` steps per quarter
note. A song is normalized with :func:`quantize_and_sort` before it is
tokenized, evaluated, or written back to disk.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib import resources

RESOLUTION = 12
MAX_BEATS = 64
MAX_DURATION = 192
N_PITCHES = 128
N_INSTRUMENTS = 64
N_GENRES = 20
DEFAULT_VELOCITY = 64
DEFAULT_STEPS_PER_MEASURE = 4 * RESOLUTION


@dataclass(frozen=True, order=True)
class Note:
    onset: int
    pitch: int
    duration: int
    velocity: int = DEFAULT_VELOCITY

    @property
    def beat(self) -> int:
        return self.onset // RESOLUTION

    @property
    def position(self) -> int:
        return self.onset - RESOLUTION * self.beat


@dataclass(frozen=True)
class Track:
    program: int
    is_drum: bool = False
    notes: tuple[Note, ...] = ()


@dataclass(frozen=True)
class Song:
    tracks: tuple[Track, ...] = ()
    genre_tags: tuple[int, ...] = ()
    has_metadata: bool = False
    steps_per_measure: int = DEFAULT_STEPS_PER_MEASURE

    def all_notes(self, include_drums: bool = True) -> list[Note]:
        return [
            n for t in self.tracks if include_drums or not t.is_drum for n in t.notes
        ]

    @property
    def n_notes(self) -> int:
        return sum(len(t.notes) for t in self.tracks)


@dataclass(frozen=True)
class CanonicalTables:
    """Instrument and genre name tables plus the external-program mapping.

    ``program_map[p]`` is the canonical instrument id for General MIDI
    program ``p`` on a pitched track, or ``None`` when the program is
    skipped. Drum tracks always map to ``drum_program``.
    """

    instruments: tuple[str, ...]
    genres: tuple[str, ...]
    program_map: tuple[int | None, ...]
    drum_program: int

    def __post_init__(self) -> None:
        if len(self.instruments) != N_INSTRUMENTS or len(set(self.instruments)) != N_INSTRUMENTS:
            raise ValueError("instrument table must hold 64 unique names")
        if len(self.genres) != N_GENRES or len(set(self.genres)) != N_GENRES:
            raise ValueError("genre table must hold 20 unique names")
        if len(self.program_map) != 128:
            raise ValueError("program map must cover programs 0-127")
        if not 0 <= self.drum_program < N_INSTRUMENTS:
            raise ValueError("drum program out of range")

    def map_program(self, program: int, is_drum: bool) -> int | None:
        if is_drum:
            return self.drum_program
        if not 0 <= program < 128:
            return None
        return self.program_map[program]

    def genre_id(self, name: str) -> int | None:
        key = name.strip().lower()
        for i, g in enumerate(self.genres):
            if g == key:
                return i
        return None

    def instrument_id(self, name: str) -> int | None:
        key = name.strip().lower()
        for i, n in enumerate(self.instruments):
            if n == key:
                return i
        return None

    @classmethod
    def from_json(cls, text: str) -> CanonicalTables:
        raw = json.loads(text)
        return cls(
            instruments=tuple(raw["instruments"]),
            genres=tuple(raw["genres"]),
            program_map=tuple(raw["program_map"]),
            drum_program=int(raw["drum_program"]),
        )


@lru_cache(maxsize=1)
def default_tables() -> CanonicalTables:
    text = resources.files("ctrlmusic.data").joinpath("tables.json").read_text()
    return CanonicalTables.from_json(text)


@dataclass
class NormalizeReport:
    dropped_notes: int = 0
    clipped_durations: int = 0
    merged_tracks: int = 0
    empty_tracks: int = 0


def quantize_and_sort_report(song: Song) -> tuple[Song, NormalizeReport]:
    """Normalize ``song`` and report what was lost.

    Notes outside beats 0-63 are dropped, durations are clipped into
    ``[1, MAX_DURATION]``, tracks sharing a program are merged (the codec
    groups notes by instrument id, so two tracks with one program cannot
    be told apart after decoding), empty tracks are removed, tracks are
    ordered by program and notes by ``(onset, pitch, duration)``.
    """
    report = NormalizeReport()
    by_program: dict[int, tuple[bool, list[Note]]] = {}
    limit = MAX_BEATS * RESOLUTION
    for track in song.tracks:
        kept = []
        for note in track.notes:
            if note.onset < 0 or note.onset >= limit:
                report.dropped_notes += 1
                continue
            dur = min(max(note.duration, 1), MAX_DURATION)
            if dur != note.duration:
                report.clipped_durations += 1
                note = replace(note, duration=dur)
            kept.append(note)
        if track.program in by_program:
            report.merged_tracks += 1
            by_program[track.program][1].extend(kept)
        else:
            by_program[track.program] = (track.is_drum, kept)

    tracks = []
    for program in sorted(by_program):
        is_drum, notes = by_program[program]
        if not notes:
            report.empty_tracks += 1
            continue
        notes.sort(key=lambda n: (n.onset, n.pitch, n.duration, n.velocity))
        tracks.append(Track(program=program, is_drum=is_drum, notes=tuple(notes)))
    return replace(song, tracks=tuple(tracks)), report


def quantize_and_sort(song: Song) -> Song:
    return quantize_and_sort_report(song)[0]


def merged_notes(song: Song) -> list[tuple[int, Note]]:
    """All ``(program, note)`` pairs in codec order: onset, program, pitch, duration."""
    pairs = [(t.program, n) for t in song.tracks for n in t.notes]
    pairs.sort(key=lambda pn: (pn[1].onset, pn[0], pn[1].pitch, pn[1].duration))
    return pairs


def validate_song(song: Song, tables: CanonicalTables | None = None) -> list[str]:
    """Return a human-readable violation for every broken invariant.

    An empty list means the song is well formed. Ordering, beats past the
    64-beat window and over-long durations are not violations; those are
    what :func:`quantize_and_sort` repairs.
    """
    tables = tables or default_tables()
    out: list[str] = []
    for ti, track in enumerate(song.tracks):
        if not 0 <= track.program < N_INSTRUMENTS:
            out.append(f"program out of range at track {ti}: {track.program} not in [0, {N_INSTRUMENTS - 1}]")
        elif track.is_drum != (track.program == tables.drum_program):
            out.append(f"drum flag inconsistent with program at track {ti}")
        for ni, note in enumerate(track.notes):
            where = f"at track {ti} note {ni}"
            if not 0 <= note.pitch < N_PITCHES:
                out.append(f"pitch out of range {where}: {note.pitch} not in [0, 127]")
            if note.onset < 0:
                out.append(f"onset out of range {where}: {note.onset} < 0")
            if note.duration < 1:
                out.append(f"duration out of range {where}: {note.duration} < 1")
            if not 0 <= note.velocity <= 127:
                out.append(f"velocity out of range {where}: {note.velocity} not in [0, 127]")
    for gi, tag in enumerate(song.genre_tags):
        if not 0 <= tag < N_GENRES:
            out.append(f"genre out of range at tag {gi}: {tag} not in [0, {N_GENRES - 1}]")
    if song.genre_tags and not song.has_metadata:
        out.append("genre tags present without metadata")
    if song.steps_per_measure <= 0:
        out.append(f"steps_per_measure out of range: {song.steps_per_measure} <= 0")
    return out
