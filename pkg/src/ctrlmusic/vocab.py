"""Event types and the dense token-id space built over them."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from .score import MAX_BEATS, MAX_DURATION, N_GENRES, N_INSTRUMENTS, N_PITCHES, RESOLUTION

VOCAB_VERSION = 1


class Kind(str, Enum):
    PAD = "pad"
    SOS = "start-of-song"
    SOT = "start-of-tags"
    SOP = "start-of-program"
    SON = "start-of-notes"
    EOS = "end-of-song"
    BEAT = "beat"
    POSITION = "position"
    PITCH = "pitch"
    DURATION = "duration"
    INSTRUMENT = "instrument"
    TAG = "tag"

    def __str__(self) -> str:
        return self.value


STRUCTURAL = (Kind.SOS, Kind.SOT, Kind.SOP, Kind.SON, Kind.EOS)

# inclusive argument range per kind
ARG_RANGE: dict[Kind, tuple[int, int]] = {
    Kind.PAD: (0, 0),
    **{k: (0, 0) for k in STRUCTURAL},
    Kind.BEAT: (0, MAX_BEATS - 1),
    Kind.POSITION: (0, RESOLUTION - 1),
    Kind.PITCH: (0, N_PITCHES - 1),
    Kind.DURATION: (1, MAX_DURATION),
    Kind.INSTRUMENT: (0, N_INSTRUMENTS - 1),
    Kind.TAG: (0, N_GENRES - 1),
}


@dataclass(frozen=True)
class Event:
    kind: Kind
    arg: int = 0

    def __post_init__(self) -> None:
        lo, hi = ARG_RANGE[self.kind]
        if not lo <= self.arg <= hi:
            raise ValueError(f"{self.kind} argument {self.arg} not in [{lo}, {hi}]")

    def __repr__(self) -> str:
        if self.kind in STRUCTURAL or self.kind is Kind.PAD:
            return self.kind.name
        return f"{self.kind.value}({self.arg})"


PAD = Event(Kind.PAD)
SOS = Event(Kind.SOS)
SOT = Event(Kind.SOT)
SOP = Event(Kind.SOP)
SON = Event(Kind.SON)
EOS = Event(Kind.EOS)


def beat(x: int) -> Event:
    return Event(Kind.BEAT, x)


def position(x: int) -> Event:
    return Event(Kind.POSITION, x)


def pitch(x: int) -> Event:
    return Event(Kind.PITCH, x)


def duration(x: int) -> Event:
    return Event(Kind.DURATION, x)


def instrument(x: int) -> Event:
    return Event(Kind.INSTRUMENT, x)


def tag(x: int) -> Event:
    return Event(Kind.TAG, x)


class VocabError(ValueError):
    pass


@dataclass(frozen=True)
class Vocabulary:
    entries: tuple[Event, ...]
    version: int = VOCAB_VERSION
    index: dict[Event, int] = field(init=False, repr=False, compare=False)
    fingerprint: str = field(init=False, compare=False)

    def __post_init__(self) -> None:
        if not self.entries or self.entries[0] != PAD:
            raise VocabError("id 0 must be the pad event")
        index = {e: i for i, e in enumerate(self.entries)}
        if len(index) != len(self.entries):
            raise VocabError("duplicate events in vocabulary")
        object.__setattr__(self, "index", index)
        digest = hashlib.sha256(self._body().encode()).hexdigest()[:16]
        object.__setattr__(self, "fingerprint", digest)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, event: Event) -> bool:
        return event in self.index

    def id_of(self, event: Event) -> int:
        try:
            return self.index[event]
        except KeyError:
            raise VocabError(f"event {event!r} not in vocabulary") from None

    def ids_of(self, events) -> list[int]:
        return [self.id_of(e) for e in events]

    def events_of(self, ids) -> list[Event]:
        n = len(self.entries)
        out = []
        for i in ids:
            if not 0 <= i < n:
                raise VocabError(f"token id {i} outside vocabulary of size {n}")
            out.append(self.entries[i])
        return out

    def has_kind(self, kind: Kind) -> bool:
        return kind in _kind_tables(self.entries)

    def kind_table(self, kind: Kind) -> tuple[np.ndarray, np.ndarray]:
        """Token ids and arguments of every entry of ``kind`` (empty if absent)."""
        empty = np.empty(0, dtype=np.int64)
        return _kind_tables(self.entries).get(kind, (empty, empty))

    def _body(self) -> str:
        return "\n".join(f"{i} {e.kind.value} {e.arg}" for i, e in enumerate(self.entries))

    def to_text(self) -> str:
        return f"# vocab fingerprint {self.fingerprint} version {self.version}\n{self._body()}\n"

    @classmethod
    def from_text(cls, text: str) -> Vocabulary:
        entries: list[Event] = []
        declared = None
        version = VOCAB_VERSION
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if "fingerprint" in parts:
                    declared = parts[parts.index("fingerprint") + 1]
                if "version" in parts:
                    version = int(parts[parts.index("version") + 1])
                continue
            i, kind, arg = line.split()
            if int(i) != len(entries):
                raise VocabError(f"vocabulary ids not dense at id {i}")
            entries.append(Event(Kind(kind), int(arg)))
        vocab = cls(tuple(entries), version)
        if declared is not None and declared != vocab.fingerprint:
            raise VocabError("vocabulary fingerprint does not match its entries")
        return vocab


@lru_cache(maxsize=None)
def _kind_tables(entries: tuple[Event, ...]) -> dict[Kind, tuple[np.ndarray, np.ndarray]]:
    grouped: dict[Kind, list[tuple[int, int]]] = {}
    for i, e in enumerate(entries):
        grouped.setdefault(e.kind, []).append((i, e.arg))
    return {
        k: (np.array([i for i, _ in v], dtype=np.int64), np.array([a for _, a in v], dtype=np.int64))
        for k, v in grouped.items()
    }


@lru_cache(maxsize=None)
def build_vocab(include_tags: bool, include_instruments: bool) -> Vocabulary:
    """Build the fixed-layout vocabulary for one representation variant.

    Layout: pad, structural markers, beats, positions, pitches, durations,
    instruments, tags. Instrument events are always present because every
    note carries its instrument; ``include_instruments`` controls only the
    start-of-program marker that opens the instrument list. ``include_tags``
    controls both the start-of-tags marker and the tag events.
    """
    entries = [PAD, SOS]
    if include_tags:
        entries.append(SOT)
    if include_instruments:
        entries.append(SOP)
    entries += [SON, EOS]
    for kind in (Kind.BEAT, Kind.POSITION, Kind.PITCH, Kind.DURATION, Kind.INSTRUMENT):
        lo, hi = ARG_RANGE[kind]
        entries += [Event(kind, a) for a in range(lo, hi + 1)]
    if include_tags:
        entries += [tag(a) for a in range(N_GENRES)]
    return Vocabulary(tuple(entries))


def extend_vocab(base: Vocabulary, target: Vocabulary) -> list[int | None]:
    """Map each target id to the base id holding the same event, or None if new.

    Events are matched by value, so the map is independent of either layout.
    """
    missing = [e for e in base.entries if e not in target]
    if missing:
        raise VocabError(f"vocabulary shrink not supported: {missing[0]!r} absent from target")
    return [base.index.get(e) for e in target.entries]
