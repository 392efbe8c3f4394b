"""Corpus ingestion, subsets, hash splits and frequency statistics.

One song per ``*.json`` file::

    {"resolution": 12,
     "tracks": [{"program": 0, "is_drum": false,
                 "notes": [{"time": 0, "pitch": 60, "duration": 12, "velocity": 64}]}],
     "metadata": {"genres": ["classical"]}}

``program`` is a General MIDI program number; it is mapped onto the
canonical instrument table on load. ``metadata`` is optional, and its
presence is what puts a song in the metadata subset.
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

from .score import (
    RESOLUTION,
    CanonicalTables,
    Note,
    Song,
    Track,
    default_tables,
    quantize_and_sort_report,
    validate_song,
)

logger = logging.getLogger(__name__)

SPLIT_BUCKETS = 10_000
SPLIT_FRACTIONS = (0.90, 0.05, 0.05)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    """One corpus song. ``source_programs`` lists the canonical program of
    every track in the source file, before same-program tracks were merged."""

    id: str
    song: Song
    source_programs: tuple[int, ...] | None = None

    @property
    def track_programs(self) -> tuple[int, ...]:
        if self.source_programs is not None:
            return self.source_programs
        return tuple(t.program for t in self.song.tracks)

    @property
    def has_metadata(self) -> bool:
        return self.song.has_metadata

    @property
    def genre_tags(self) -> tuple[int, ...]:
        return self.song.genre_tags


class Subset(str, Enum):
    FULL = "full"
    METADATA = "metadata"
    GENRE = "genre"


@dataclass
class LoadReport:
    files: int = 0
    skipped_tracks: int = 0
    dropped_notes: int = 0
    unknown_genres: int = 0
    errors: list[str] = field(default_factory=list)


def _rescale(value: int, resolution: int, what: str) -> int:
    scaled, rem = divmod(int(value) * RESOLUTION, resolution)
    if rem:
        raise CorpusError(f"{what} {value} is not exactly representable at resolution {RESOLUTION}")
    return scaled


def song_from_json(obj: dict, tables: CanonicalTables | None = None, report: LoadReport | None = None) -> Song:
    """Parse and normalize one interchange object."""
    song = _parse_song(obj, tables, report)
    song, norm = quantize_and_sort_report(song)
    if report is not None:
        report.dropped_notes += norm.dropped_notes
    return song


def _parse_song(obj: dict, tables: CanonicalTables | None, report: LoadReport | None) -> Song:
    tables = tables or default_tables()
    report = report if report is not None else LoadReport()
    if not isinstance(obj, dict):
        raise CorpusError("song file must hold a JSON object")
    try:
        resolution = int(obj.get("resolution", RESOLUTION))
        raw_tracks = obj["tracks"]
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"malformed song object: {exc}") from None
    if resolution <= 0:
        raise CorpusError(f"resolution must be positive, got {resolution}")

    tracks = []
    for raw in raw_tracks:
        is_drum = bool(raw.get("is_drum", False))
        program = tables.map_program(int(raw.get("program", 0)), is_drum)
        if program is None:
            report.skipped_tracks += 1
            continue
        notes = tuple(
            Note(
                onset=_rescale(n["time"], resolution, "time"),
                pitch=int(n["pitch"]),
                duration=_rescale(n["duration"], resolution, "duration"),
                velocity=int(n.get("velocity", 64)),
            )
            for n in raw.get("notes", ())
        )
        tracks.append(Track(program=program, is_drum=program == tables.drum_program, notes=notes))

    meta = obj.get("metadata")
    genre_tags: list[int] = []
    if meta is not None:
        for name in meta.get("genres", ()):
            gid = tables.genre_id(str(name))
            if gid is None:
                report.unknown_genres += 1
            elif gid not in genre_tags:
                genre_tags.append(gid)
    return Song(tracks=tuple(tracks), genre_tags=tuple(sorted(genre_tags)), has_metadata=meta is not None)


def song_to_json(song: Song, tables: CanonicalTables | None = None) -> dict:
    """Interchange form of ``song``; canonical instruments map back to their first GM program."""
    tables = tables or default_tables()
    tracks = []
    for t in song.tracks:
        if t.program == tables.drum_program:
            gm, is_drum = 0, True
        else:
            gm, is_drum = tables.program_map.index(t.program), False
        tracks.append({
            "program": gm,
            "is_drum": is_drum,
            "notes": [
                {"time": n.onset, "pitch": n.pitch, "duration": n.duration, "velocity": n.velocity}
                for n in t.notes
            ],
        })
    obj: dict = {"resolution": RESOLUTION, "tracks": tracks}
    if song.has_metadata:
        obj["metadata"] = {"genres": [tables.genres[g] for g in song.genre_tags]}
    return obj


def write_song(path: str | Path, song: Song, tables: CanonicalTables | None = None) -> None:
    Path(path).write_text(json.dumps(song_to_json(song, tables), indent=1) + "\n")


def read_song(path: str | Path, tables: CanonicalTables | None = None, report: LoadReport | None = None) -> Song:
    return _read_entry(Path(path), tables, report).song


def _read_entry(path: Path, tables: CanonicalTables | None, report: LoadReport | None) -> CorpusEntry:
    try:
        obj = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"{path.name}: {exc}") from None
    try:
        raw = _parse_song(obj, tables, report)
    except (CorpusError, KeyError, TypeError, ValueError) as exc:
        raise CorpusError(f"{path.name}: {exc}") from None
    problems = validate_song(raw, tables)
    if problems:
        raise CorpusError(f"{path.name}: {problems[0]}")
    song, norm = quantize_and_sort_report(raw)
    if report is not None:
        report.dropped_notes += norm.dropped_notes
    return CorpusEntry(path.stem, song, tuple(t.program for t in raw.tracks))


def load_corpus_report(
    path: str | Path, tables: CanonicalTables | None = None, strict: bool = True
) -> tuple[list[CorpusEntry], LoadReport]:
    """Load every ``*.json`` under ``path`` (or the single file ``path``).

    Entry ids are file stems; entries come back sorted by id. With ``strict``
    the first unreadable file raises; otherwise it is logged and skipped.
    """
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"{path}: no such file or directory")
    files = [path] if path.is_file() else sorted(path.glob("*.json"))
    report = LoadReport()
    entries = []
    for f in files:
        try:
            entry = _read_entry(f, tables, report)
        except CorpusError as exc:
            if strict:
                raise
            report.errors.append(str(exc))
            logger.warning("skipping %s", exc)
            continue
        report.files += 1
        entries.append(entry)
    if report.skipped_tracks:
        logger.warning("skipped %d track(s) with unmappable programs", report.skipped_tracks)
    if not entries:
        raise CorpusError(f"{path}: no valid songs found")
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise CorpusError(f"{path}: duplicate song ids")
    entries.sort(key=lambda e: e.id)
    return entries, report


def load_corpus(path: str | Path, tables: CanonicalTables | None = None, strict: bool = True) -> list[CorpusEntry]:
    return load_corpus_report(path, tables, strict)[0]


def filter_subset(corpus: Sequence[CorpusEntry], subset: Subset | str) -> list[CorpusEntry]:
    subset = Subset(subset)
    if subset is Subset.FULL:
        return list(corpus)
    if subset is Subset.METADATA:
        return [e for e in corpus if e.has_metadata]
    return [e for e in corpus if e.genre_tags]


def split_bucket(entry_id: str, seed: int) -> int:
    digest = hashlib.blake2b(entry_id.encode(), key=str(seed).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") % SPLIT_BUCKETS


def split_name(entry_id: str, seed: int) -> str:
    bucket = split_bucket(entry_id, seed)
    train_end = round(SPLIT_FRACTIONS[0] * SPLIT_BUCKETS)
    valid_end = train_end + round(SPLIT_FRACTIONS[1] * SPLIT_BUCKETS)
    if bucket < train_end:
        return "train"
    return "valid" if bucket < valid_end else "test"


def split(corpus: Sequence, seed: int) -> tuple[list, list, list]:
    """Partition by keyed hash of each entry id: 90% train, 5% valid, 5% test.

    Accepts entries or bare id strings. Assignment depends only on
    ``(id, seed)``, so it survives corpus growth and reordering.
    """
    out: dict[str, list] = {"train": [], "valid": [], "test": []}
    for item in corpus:
        entry_id = item if isinstance(item, str) else item.id
        out[split_name(entry_id, seed)].append(item)
    return out["train"], out["valid"], out["test"]


def corpus_stats(corpus: Sequence[CorpusEntry]) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    """Genre counts per song and instrument counts per track, most common first."""
    genres: Counter[int] = Counter()
    instruments: Counter[int] = Counter()
    for e in corpus:
        genres.update(set(e.genre_tags))
        instruments.update(e.track_programs)

    def ranked(c: Counter[int]) -> list[tuple[int, int]]:
        return sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))

    return ranked(genres), ranked(instruments)
