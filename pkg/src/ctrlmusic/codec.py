"""Song <-> event-sequence codec and the streaming grammar behind it.

A sequence is a prefix followed by note groups::

    SOS [SOT tag+] [SOP instrument*] SON (beat position instrument pitch duration)* EOS

The bracketed lists appear only in the variants that carry them, sorted
strictly ascending. Beats never decrease across note groups.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import vocab as V
from .score import (
    RESOLUTION,
    Note,
    Song,
    Track,
    default_tables,
    merged_notes,
    quantize_and_sort,
)
from .vocab import Event, Kind, Vocabulary, build_vocab


class Variant(str, Enum):
    UNCOND = "uncond"
    MMT_I = "mmt-i"
    MMT_G = "mmt-g"
    MMT_GI = "mmt-gi"

    @property
    def has_tags(self) -> bool:
        return self in (Variant.MMT_G, Variant.MMT_GI)

    @property
    def has_programs(self) -> bool:
        return self in (Variant.MMT_I, Variant.MMT_GI)

    def vocab(self) -> Vocabulary:
        return build_vocab(self.has_tags, self.has_programs)

    @classmethod
    def parse(cls, name: str) -> Variant:
        key = name.strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown variant {name!r}; expected one of {', '.join(v.value for v in cls)}")


class CodecError(ValueError):
    pass


class GrammarError(CodecError):
    """Raised when an event is not accepted; carries what would have been."""

    def __init__(self, message: str, allowed: frozenset[Kind] = frozenset(), index: int | None = None):
        self.allowed = allowed
        self.index = index
        if index is not None:
            expected = ", ".join(sorted(k.value for k in allowed)) or "nothing"
            message = f"grammar error at index {index}: {message}; expected {{{expected}}}"
        super().__init__(message)


class Section(Enum):
    EXPECT_SOS = "expect-sos"
    EXPECT_SOT = "expect-sot"
    TAGS = "tags"
    EXPECT_SOP = "expect-sop"
    PROGRAMS = "program"
    EXPECT_SON = "expect-son"
    NOTES = "notes"
    DONE = "done"


NOTE_FIELDS = (Kind.BEAT, Kind.POSITION, Kind.INSTRUMENT, Kind.PITCH, Kind.DURATION)
NOTE_GROUP = len(NOTE_FIELDS)
_NEXT_FIELD = {k: NOTE_FIELDS[(i + 1) % NOTE_GROUP] for i, k in enumerate(NOTE_FIELDS)}


@dataclass(frozen=True)
class GrammarState:
    variant: Variant
    section: Section = Section.EXPECT_SOS
    next_field: Kind = Kind.BEAT
    last_beat: int = 0
    declared_tags: frozenset[int] = frozenset()
    declared_programs: frozenset[int] = frozenset()

    @classmethod
    def initial(cls, variant: Variant) -> GrammarState:
        return cls(variant)

    @property
    def done(self) -> bool:
        return self.section is Section.DONE

    @property
    def at_group_boundary(self) -> bool:
        return self.section is Section.NOTES and self.next_field is Kind.BEAT


def _after_tags(variant: Variant) -> Section:
    return Section.EXPECT_SOP if variant.has_programs else Section.EXPECT_SON


def allowed_args(state: GrammarState) -> dict[Kind, int]:
    """Kinds acceptable next, each mapped to its smallest acceptable argument."""
    sec = state.section
    if sec is Section.EXPECT_SOS:
        return {Kind.SOS: 0}
    if sec is Section.EXPECT_SOT:
        return {Kind.SOT: 0}
    if sec is Section.TAGS:
        if not state.declared_tags:
            return {Kind.TAG: 0}
        closer = Kind.SOP if state.variant.has_programs else Kind.SON
        return {Kind.TAG: max(state.declared_tags) + 1, closer: 0}
    if sec is Section.EXPECT_SOP:
        return {Kind.SOP: 0}
    if sec is Section.PROGRAMS:
        lo = max(state.declared_programs) + 1 if state.declared_programs else 0
        return {Kind.INSTRUMENT: lo, Kind.SON: 0}
    if sec is Section.EXPECT_SON:
        return {Kind.SON: 0}
    if sec is Section.NOTES:
        if state.next_field is Kind.BEAT:
            return {Kind.BEAT: state.last_beat, Kind.EOS: 0}
        return {state.next_field: V.ARG_RANGE[state.next_field][0]}
    return {}


def accepts(state: GrammarState, event: Event) -> bool:
    lo = allowed_args(state).get(event.kind)
    return lo is not None and event.arg >= lo


def advance(state: GrammarState, event: Event) -> GrammarState:
    """Consume one event, returning the successor state.

    Raises :class:`GrammarError` carrying the allowed kinds on rejection.
    """
    allowed = allowed_args(state)
    lo = allowed.get(event.kind)
    if lo is None or event.arg < lo:
        raise GrammarError(_reject_reason(state, event, lo), frozenset(allowed))

    kind, sec = event.kind, state.section
    if kind is Kind.SOS:
        nxt = Section.EXPECT_SOT if state.variant.has_tags else (
            Section.EXPECT_SOP if state.variant.has_programs else Section.EXPECT_SON
        )
        return replace(state, section=nxt)
    if kind is Kind.SOT:
        return replace(state, section=Section.TAGS)
    if kind is Kind.TAG:
        return replace(state, declared_tags=state.declared_tags | {event.arg})
    if kind is Kind.SOP:
        return replace(state, section=Section.PROGRAMS)
    if kind is Kind.SON:
        return replace(state, section=Section.NOTES, next_field=Kind.BEAT)
    if kind is Kind.EOS:
        return replace(state, section=Section.DONE)
    if sec is Section.PROGRAMS:
        return replace(state, declared_programs=state.declared_programs | {event.arg})
    if kind is Kind.BEAT:
        return replace(state, next_field=Kind.POSITION, last_beat=event.arg)
    return replace(state, next_field=_NEXT_FIELD[kind])


def _reject_reason(state: GrammarState, event: Event, lo: int | None) -> str:
    if lo is not None:
        if event.kind is Kind.BEAT:
            return f"beat {event.arg} before previous beat {state.last_beat}"
        return f"{event.kind.value} list not strictly ascending at {event.arg}"
    if state.section is Section.DONE:
        return "event after end-of-song"
    if state.section is Section.NOTES:
        if event.kind is Kind.TAG:
            return "tag outside tag section"
        if event.kind in (Kind.SOT, Kind.SOP, Kind.SOS, Kind.SON):
            return f"{event.kind.value} inside note section"
    return f"unexpected {event.kind.value}"


def allowed_mask(state: GrammarState, vocab: Vocabulary, enforce_condition: bool = True) -> np.ndarray:
    """Boolean vector over ``vocab``: True exactly where :func:`advance` accepts.

    With ``enforce_condition`` on, a note's instrument is further restricted
    to the programs declared in the prefix (for variants that declare any).
    """
    mask = np.zeros(len(vocab), dtype=bool)
    for kind, lo in allowed_args(state).items():
        ids, args = vocab.kind_table(kind)
        if (
            enforce_condition
            and kind is Kind.INSTRUMENT
            and state.section is Section.NOTES
            and state.variant.has_programs
        ):
            mask[ids[np.isin(args, list(state.declared_programs))]] = True
        else:
            mask[ids[args >= lo]] = True
    return mask


def check_sequence(events: Sequence[Event], variant: Variant) -> GrammarState:
    """Fold :func:`advance` over ``events``; errors name the offending index."""
    state = GrammarState.initial(variant)
    for i, event in enumerate(events):
        try:
            state = advance(state, event)
        except GrammarError as exc:
            raise GrammarError(str(exc), exc.allowed, index=i) from None
    return state


def prefix_events(variant: Variant, tags: Iterable[int] = (), programs: Iterable[int] = ()) -> list[Event]:
    out = [V.SOS]
    if variant.has_tags:
        out.append(V.SOT)
        out += [V.tag(t) for t in sorted(set(tags))]
    if variant.has_programs:
        out.append(V.SOP)
        out += [V.instrument(p) for p in sorted(set(programs))]
    out.append(V.SON)
    return out


def encode(song: Song, variant: Variant) -> list[Event]:
    song = quantize_and_sort(song)
    if variant.has_tags and not song.genre_tags:
        raise CodecError("missing genre condition")
    events = prefix_events(variant, song.genre_tags, (t.program for t in song.tracks))
    for program, note in merged_notes(song):
        events += [
            V.beat(note.beat),
            V.position(note.position),
            V.instrument(program),
            V.pitch(note.pitch),
            V.duration(note.duration),
        ]
    events.append(V.EOS)
    return events


def expected_length(song: Song, variant: Variant) -> int:
    song = quantize_and_sort(song)
    n = 3 + NOTE_GROUP * song.n_notes
    if variant.has_tags:
        n += 1 + len(set(song.genre_tags))
    if variant.has_programs:
        n += 1 + len(song.tracks)
    return n


def decode(events: Sequence[Event], variant: Variant, strict: bool = True) -> Song:
    """Rebuild a song from an event sequence.

    With ``strict`` the sequence must end with end-of-song. Otherwise a
    truncated sequence is accepted and an incomplete trailing note group is
    dropped; grammar violations are errors either way.
    """
    state = check_sequence(events, variant)
    if strict and not state.done:
        raise GrammarError("sequence ended before end-of-song", frozenset(allowed_args(state)), index=len(events))

    tracks: dict[int, list[Note]] = defaultdict(list)
    try:
        son = events.index(V.SON)
    except ValueError:
        son = len(events)
    body = events[son + 1:]
    for g in range(len(body) // NOTE_GROUP):
        b, pos, ins, p, d = body[g * NOTE_GROUP:(g + 1) * NOTE_GROUP]
        if b.kind is not Kind.BEAT:
            break
        tracks[ins.arg].append(Note(onset=RESOLUTION * b.arg + pos.arg, pitch=p.arg, duration=d.arg))

    drum = default_tables().drum_program
    out = tuple(
        Track(program=prog, is_drum=prog == drum, notes=tuple(sorted(notes)))
        for prog, notes in sorted(tracks.items())
    )
    return Song(tracks=out, genre_tags=tuple(sorted(state.declared_tags)), has_metadata=bool(state.declared_tags))


# token files ---------------------------------------------------------------


def write_token_file(path: str | Path, vocab: Vocabulary, sequences: Iterable[Sequence[int]]) -> None:
    lines = [f"#vocab {vocab.fingerprint}"]
    lines += [" ".join(str(i) for i in seq) for seq in sequences]
    Path(path).write_text("\n".join(lines) + "\n")


def read_token_file(path: str | Path, vocab: Vocabulary | None = None) -> list[list[int]]:
    """Read a token file; if ``vocab`` is given its fingerprint must match the header."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#vocab "):
        raise CodecError(f"{path}: missing '#vocab <fingerprint>' header")
    fingerprint = lines[0].split()[1]
    if vocab is not None and fingerprint != vocab.fingerprint:
        raise CodecError(f"{path}: token file vocabulary {fingerprint} does not match {vocab.fingerprint}")
    return [[int(tok) for tok in line.split()] for line in lines[1:] if line.strip()]


def token_file_fingerprint(path: str | Path) -> str:
    with open(path) as fh:
        head = fh.readline().split()
    if len(head) != 2 or head[0] != "#vocab":
        raise CodecError(f"{path}: missing '#vocab <fingerprint>' header")
    return head[1]
