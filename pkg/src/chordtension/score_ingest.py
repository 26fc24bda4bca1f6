"""Symbolic score ingestion.

Parses a restricted **kern subset and a plain note-event interchange format
into NoteEvents, and expands them into time-ordered harmonic slices (every
unique onset lists all sounding pitches).

Kern subset (anything outside it is a hard parse error, never a silent skip):
  - exclusive interpretations; only ``**kern`` spines carry note data, other
    spine types are ignored
  - note/rest/chord data tokens: recip duration digits with optional
    augmentation dots, pitch letters (``c`` = C4 = MIDI 60, ``cc`` = C5,
    ``C`` = C3), accidentals ``#``/``-``/``n``, ties ``[`` ``_`` ``]``
  - barlines (ignored for timing), comments, tandem interpretations
    (key/meter recorded as metadata, otherwise unused), ``*-`` terminator
  - NOT supported: spine split/merge/add/exchange, grace notes, editorial
    or ornament signifiers

Interchange format: UTF-8 lines ``onset,duration,pitch,voice`` with rationals
written ``p/q``; ``#`` starts a comment line.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    EmptyInput,
    MalformedDuration,
    MalformedRecord,
    NegativeDuration,
    NoKernSpine,
    UnsupportedToken,
)

_PITCH_BASE = {"c": 0, "d": 2, "e": 4, "f": 5, "g": 7, "a": 9, "b": 11}

_NOTE_RE = re.compile(
    r"^(?P<tie_open>\[)?"
    r"(?P<digits>\d+)(?P<dots>\.*)"
    r"(?P<letters>[a-gA-G]+|r)"
    r"(?P<acc>#{1,2}|-{1,2}|n)?"
    r"(?P<tie_close>[\]_])?$"
)

# spine manipulators are out of the supported subset
_SPINE_MANIPULATORS = {"*^", "*v", "*+", "*x"}


@dataclass(frozen=True, order=True)
class NoteEvent:
    """A pitched event; times are rationals in whole-note units."""

    onset: Fraction
    duration: Fraction
    pitch: int
    voice: int

    def __post_init__(self):
        if self.onset < 0:
            raise ValueError(f"negative onset {self.onset}")
        if self.duration <= 0:
            raise NegativeDuration(f"non-positive duration {self.duration}")
        if not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch {self.pitch} outside MIDI range 0-127")


@dataclass(frozen=True)
class Slice:
    """All pitches sounding at one unique onset."""

    onset: Fraction
    pitches: tuple[int, ...]  # sorted multiset

    def __post_init__(self):
        if not self.pitches:
            raise ValueError("empty slice")

    @property
    def bass(self) -> int:
        return self.pitches[0]


@dataclass
class KernMetadata:
    key: str | None = None
    meter: str | None = None
    other_tandems: list[str] = field(default_factory=list)


def _recip_to_duration(digits: str, dots: str, line_no: int) -> Fraction:
    """Kern recip -> duration in whole notes. ``0`` is a breve, ``00`` a longa."""
    if set(digits) == {"0"}:
        base = Fraction(2) ** len(digits)
    else:
        n = int(digits)
        if n == 0:
            raise MalformedDuration(f"bad recip {digits!r}", line_no)
        base = Fraction(1, n)
    if dots:
        d = len(dots)
        base = base * (2 ** (d + 1) - 1) / 2**d
    return base


def _kern_pitch(letters: str, acc: str | None, line_no: int) -> int:
    letter = letters[0]
    if letters != letter * len(letters):
        raise UnsupportedToken(f"mixed pitch letters {letters!r}", line_no)
    if letter.islower():
        octave = 3 + len(letters)
    else:
        octave = 4 - len(letters)
    semitone = _PITCH_BASE[letter.lower()]
    shift = 0
    if acc:
        if acc[0] == "#":
            shift = len(acc)
        elif acc[0] == "-":
            shift = -len(acc)
    midi = 12 * (octave + 1) + semitone + shift
    if not 0 <= midi <= 127:
        raise UnsupportedToken(f"pitch {letters}{acc or ''} outside MIDI range", line_no)
    return midi


class _SpineState:
    __slots__ = ("voice", "clock", "open_ties", "closed")

    def __init__(self, voice: int):
        self.voice = voice
        self.clock = Fraction(0)
        self.open_ties: dict[int, int] = {}  # pitch -> index into event buffer
        self.closed = False


def parse_kern_document(text: str) -> tuple[list[NoteEvent], KernMetadata]:
    """Parse kern text into note events plus key/meter metadata."""
    lines = text.splitlines()
    spine_types: list[str] | None = None
    kern_columns: dict[int, _SpineState] = {}
    meta = KernMetadata()
    # mutable event buffer so ties can extend durations in place
    buffer: list[list] = []  # [onset, duration, pitch, voice]

    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("!!"):
            continue
        tokens = line.split("\t")
        if spine_types is None:
            if all(t.startswith("**") for t in tokens):
                spine_types = tokens
                voice = 0
                for col, t in enumerate(tokens):
                    if t == "**kern":
                        kern_columns[col] = _SpineState(voice)
                        voice += 1
                if not kern_columns:
                    raise NoKernSpine("no **kern spine in document")
                continue
            raise UnsupportedToken(
                f"data before exclusive interpretation line: {line!r}", line_no
            )
        if len(tokens) != len(spine_types):
            raise UnsupportedToken(
                f"expected {len(spine_types)} spines, got {len(tokens)}", line_no
            )
        for col, token in enumerate(tokens):
            if col not in kern_columns:
                continue
            _consume_token(token, kern_columns[col], buffer, meta, line_no)

    if spine_types is None:
        raise NoKernSpine("no **kern spine in document")

    events = [
        NoteEvent(onset=o, duration=d, pitch=p, voice=v) for o, d, p, v in buffer
    ]
    events.sort(key=lambda e: (e.onset, e.voice, e.pitch))
    return events, meta


def _consume_token(
    token: str, spine: _SpineState, buffer: list[list], meta: KernMetadata, line_no: int
) -> None:
    if token == "." or token.startswith("!") or token.startswith("="):
        return
    if token.startswith("*"):
        if token == "*-":
            spine.closed = True
        elif token in _SPINE_MANIPULATORS:
            raise UnsupportedToken(f"spine manipulator {token!r}", line_no)
        elif token.startswith("*M") and len(token) > 2:
            meta.meter = token[2:]
        elif token.endswith(":") and len(token) > 2:
            meta.key = token[1:-1]
        elif token != "*":
            meta.other_tandems.append(token)
        return
    if spine.closed:
        raise UnsupportedToken("data token after spine terminator", line_no)

    chord_duration: Fraction | None = None
    for sub in token.split(" "):
        m = _NOTE_RE.match(sub)
        if m is None:
            raise UnsupportedToken(f"unsupported token {sub!r}", line_no)
        duration = _recip_to_duration(m["digits"], m["dots"], line_no)
        if chord_duration is None:
            chord_duration = duration
        elif duration != chord_duration:
            raise UnsupportedToken(
                f"chord notes with unequal durations in {token!r}", line_no
            )
        if m["letters"] == "r":
            if m["tie_open"] or m["tie_close"] or m["acc"]:
                raise UnsupportedToken(f"decorated rest {sub!r}", line_no)
            continue
        pitch = _kern_pitch(m["letters"], m["acc"], line_no)
        tie_open = m["tie_open"] is not None
        tie_mark = m["tie_close"]  # ']' close, '_' continue, None plain

        if tie_mark in ("]", "_") and not tie_open:
            idx = spine.open_ties.get(pitch)
            if idx is None:
                raise UnsupportedToken(
                    f"tie continuation without open tie on pitch {pitch}", line_no
                )
            buffer[idx][1] += duration
            if tie_mark == "]":
                del spine.open_ties[pitch]
            continue
        buffer.append([spine.clock, duration, pitch, spine.voice])
        if tie_open:
            spine.open_ties[pitch] = len(buffer) - 1
    if chord_duration is not None:
        spine.clock += chord_duration


def parse_kern(text: str) -> list[NoteEvent]:
    """Parse kern text into a sorted list of NoteEvents."""
    events, _ = parse_kern_document(text)
    return events


def parse_events(text: str) -> list[NoteEvent]:
    """Parse the note-event interchange format."""
    events = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise MalformedRecord(f"line {line_no}: expected 4 fields, got {len(parts)}")
        try:
            onset = Fraction(parts[0])
            duration = Fraction(parts[1])
            pitch = int(parts[2])
            voice = int(parts[3])
        except (ValueError, ZeroDivisionError) as exc:
            raise MalformedRecord(f"line {line_no}: {exc}") from exc
        if duration <= 0:
            raise NegativeDuration(f"line {line_no}: duration {duration} must be > 0")
        try:
            events.append(NoteEvent(onset, duration, pitch, voice))
        except ValueError as exc:
            raise MalformedRecord(f"line {line_no}: {exc}") from exc
    events.sort(key=lambda e: (e.onset, e.voice, e.pitch))
    return events


def serialize_events(events: list[NoteEvent]) -> str:
    """Inverse of parse_events (up to sorting)."""
    lines = [f"{e.onset},{e.duration},{e.pitch},{e.voice}" for e in events]
    return "\n".join(lines) + "\n" if lines else ""


def full_expansion(events: list[NoteEvent]) -> list[Slice]:
    """One Slice per unique onset; a slice holds every event sounding there.

    Membership uses half-open intervals [onset, onset + duration), so a note
    ending exactly at t is not sounding at t.
    """
    if not events:
        raise EmptyInput("no events to expand")
    ordered = sorted(events, key=lambda e: (e.onset, e.pitch))
    onsets = sorted({e.onset for e in ordered})
    slices = []
    active: list[tuple[Fraction, int]] = []  # (end, pitch) min-heap
    i = 0
    for t in onsets:
        while i < len(ordered) and ordered[i].onset == t:
            e = ordered[i]
            heapq.heappush(active, (e.onset + e.duration, e.pitch))
            i += 1
        while active and active[0][0] <= t:
            heapq.heappop(active)
        if active:
            slices.append(Slice(onset=t, pitches=tuple(sorted(p for _, p in active))))
    return slices
