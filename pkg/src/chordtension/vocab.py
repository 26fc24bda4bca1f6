"""Chord vocabulary construction.

Reduces slices to bass-tagged pitch-class sets (HarmonicUnits), augments every
piece with all twelve transpositions from -5 to +6 semitones, and emits
integer-ID sequences for embedding training.

The unit keeps the bass pitch class apart from the upper pitch classes so that
inversions of the same pitch-class set stay distinct; ``pure_pcset=True``
collapses that distinction for ablation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import EmptyCorpus
from .score_ingest import Slice

TRANSPOSITIONS = tuple(range(-5, 7))


@dataclass(frozen=True)
class HarmonicUnit:
    """Bass pitch class plus the set of upper pitch classes (bass excluded)."""

    bass_pc: int
    upper_pcs: frozenset[int]

    def __post_init__(self):
        if not 0 <= self.bass_pc <= 11:
            raise ValueError(f"bass_pc {self.bass_pc} outside 0-11")
        if any(not 0 <= pc <= 11 for pc in self.upper_pcs):
            raise ValueError("upper pitch class outside 0-11")
        if self.bass_pc in self.upper_pcs:
            raise ValueError("bass_pc duplicated in upper_pcs")

    @property
    def pcs(self) -> frozenset[int]:
        """All pitch classes including the bass."""
        return self.upper_pcs | {self.bass_pc}

    def canonical(self) -> str:
        """Bass first, then upper pitch classes ascending."""
        return ",".join(str(pc) for pc in (self.bass_pc, *sorted(self.upper_pcs)))


def reduce(slice_: Slice, pure_pcset: bool = False) -> HarmonicUnit:
    """Collapse a slice to pitch classes; the lowest pitch supplies the bass."""
    pcs = {p % 12 for p in slice_.pitches}
    bass_pc = slice_.bass % 12
    if pure_pcset:
        bass_pc = min(pcs)
    return HarmonicUnit(bass_pc=bass_pc, upper_pcs=frozenset(pcs - {bass_pc}))


def transpose(unit: HarmonicUnit, k: int) -> HarmonicUnit:
    if k not in TRANSPOSITIONS:
        raise ValueError(f"transposition {k} outside {TRANSPOSITIONS[0]}..{TRANSPOSITIONS[-1]}")
    return HarmonicUnit(
        bass_pc=(unit.bass_pc + k) % 12,
        upper_pcs=frozenset((pc + k) % 12 for pc in unit.upper_pcs),
    )


@dataclass
class Vocabulary:
    """Dense-ID bijection between HarmonicUnits and integers, with counts."""

    unit_to_id: dict[HarmonicUnit, int] = field(default_factory=dict)
    id_to_unit: list[HarmonicUnit] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.id_to_unit)

    def intern(self, unit: HarmonicUnit) -> int:
        """Return the unit's ID, assigning the next dense ID on first sight."""
        uid = self.unit_to_id.get(unit)
        if uid is None:
            uid = len(self.id_to_unit)
            self.unit_to_id[unit] = uid
            self.id_to_unit.append(unit)
            self.counts.append(0)
        self.counts[uid] += 1
        return uid

    def digest(self) -> str:
        """SHA-256 over the canonical serialization; binds models to vocabularies."""
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def to_text(self) -> str:
        lines = []
        for uid, unit in enumerate(self.id_to_unit):
            upper = ",".join(str(pc) for pc in sorted(unit.upper_pcs))
            lines.append(f"{uid}\t{unit.bass_pc}\t{upper}\t{self.counts[uid]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        vocab = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            uid_s, bass_s, upper_s, count_s = line.split("\t")
            unit = HarmonicUnit(
                bass_pc=int(bass_s),
                upper_pcs=frozenset(int(p) for p in upper_s.split(",") if p),
            )
            uid = int(uid_s)
            if uid != len(vocab.id_to_unit):
                raise ValueError(f"non-dense vocabulary ID {uid}")
            vocab.unit_to_id[unit] = uid
            vocab.id_to_unit.append(unit)
            vocab.counts.append(int(count_s))
        return vocab


@dataclass
class PieceSequence:
    """One transposed piece as a sequence of vocabulary IDs."""

    piece_id: str
    transposition: int
    ids: list[int]
    unit_onsets: list[Fraction]

    def __post_init__(self):
        if len(self.ids) != len(self.unit_onsets):
            raise ValueError("ids and unit_onsets length mismatch")


def build_corpus(
    pieces: list[tuple[str, list[Slice]]], pure_pcset: bool = False
) -> tuple[Vocabulary, list[PieceSequence]]:
    """Reduce, transpose (-5..+6) and intern every piece of the corpus.

    Twelve PieceSequences per piece; IDs are assigned in first-occurrence
    order of a fixed scan (pieces in given order, transpositions ascending),
    which makes the vocabulary deterministic for a fixed corpus.
    """
    if not pieces:
        raise EmptyCorpus("no pieces")
    vocab = Vocabulary()
    sequences = []
    for piece_id, slices in pieces:
        if not slices:
            raise EmptyCorpus(f"piece {piece_id!r} has no slices")
        units = [reduce(s, pure_pcset=pure_pcset) for s in slices]
        onsets = [s.onset for s in slices]
        for k in TRANSPOSITIONS:
            ids = [vocab.intern(transpose(u, k)) for u in units]
            sequences.append(
                PieceSequence(
                    piece_id=piece_id, transposition=k, ids=ids, unit_onsets=list(onsets)
                )
            )
    return vocab, sequences


def write_sequences(sequences: list[PieceSequence]) -> str:
    """Sequence file: ``piece_id<TAB>transposition<TAB>id id id ...``."""
    lines = [
        f"{s.piece_id}\t{s.transposition}\t{' '.join(str(i) for i in s.ids)}"
        for s in sequences
    ]
    return "\n".join(lines) + "\n"


def write_onsets(sequences: list[PieceSequence]) -> str:
    """Onset file, one line per piece (onsets are shared by all transpositions)."""
    seen = set()
    lines = []
    for s in sequences:
        if s.piece_id in seen:
            continue
        seen.add(s.piece_id)
        lines.append(f"{s.piece_id}\t{' '.join(str(o) for o in s.unit_onsets)}")
    return "\n".join(lines) + "\n"


def read_sequences(seq_text: str, onset_text: str) -> list[PieceSequence]:
    onsets_by_piece: dict[str, list[Fraction]] = {}
    for line in onset_text.splitlines():
        if not line.strip():
            continue
        piece_id, rest = line.split("\t")
        onsets_by_piece[piece_id] = [Fraction(o) for o in rest.split()]
    sequences = []
    for line in seq_text.splitlines():
        if not line.strip():
            continue
        piece_id, transposition, ids_s = line.split("\t")
        ids = [int(i) for i in ids_s.split()]
        sequences.append(
            PieceSequence(
                piece_id=piece_id,
                transposition=int(transposition),
                ids=ids,
                unit_onsets=onsets_by_piece[piece_id],
            )
        )
    return sequences
