"""Chord classification into type / quality / inversion categories.

A unit's full pitch-class content is matched against interval templates
relative to every candidate root present in the set; the interval from root
to bass determines the inversion. Sets that are not exactly one template
(extra or missing tones) are Unclassified.

Symmetric sonorities (augmented triads, fully diminished sevenths) match
under several roots; they are reported with the bass as root and inversion
"root", since the experiments only group them at quality level.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .vocab import HarmonicUnit


class ChordType(str, Enum):
    TRIAD = "triad"
    SEVENTH = "seventh"


class Quality(str, Enum):
    MAJOR = "major"
    MINOR = "minor"
    DIMINISHED = "diminished"
    AUGMENTED = "augmented"
    DOMINANT7 = "dominant7"
    MAJOR7 = "major7"
    MINOR7 = "minor7"
    HALFDIM7 = "halfdim7"
    DIM7 = "dim7"


class Inversion(str, Enum):
    ROOT = "root"
    FIRST = "first"
    SECOND = "second"
    THIRD = "third"


TRIAD_TEMPLATES = {
    (0, 4, 7): Quality.MAJOR,
    (0, 3, 7): Quality.MINOR,
    (0, 3, 6): Quality.DIMINISHED,
    (0, 4, 8): Quality.AUGMENTED,
}

SEVENTH_TEMPLATES = {
    (0, 4, 7, 10): Quality.DOMINANT7,
    (0, 4, 7, 11): Quality.MAJOR7,
    (0, 3, 7, 10): Quality.MINOR7,
    (0, 3, 6, 10): Quality.HALFDIM7,
    (0, 3, 6, 9): Quality.DIM7,
}

_SYMMETRIC = {Quality.AUGMENTED, Quality.DIM7}

# interval from root to bass -> inversion
_INVERSION_BY_INTERVAL = {
    0: Inversion.ROOT,
    3: Inversion.FIRST,
    4: Inversion.FIRST,
    6: Inversion.SECOND,
    7: Inversion.SECOND,
    8: Inversion.SECOND,
    9: Inversion.THIRD,
    10: Inversion.THIRD,
    11: Inversion.THIRD,
}


@dataclass(frozen=True)
class ChordClass:
    chord_type: ChordType
    quality: Quality
    inversion: Inversion

    def __post_init__(self):
        if self.chord_type is ChordType.TRIAD:
            if self.quality not in TRIAD_TEMPLATES.values():
                raise ValueError(f"{self.quality} is not a triad quality")
            if self.inversion is Inversion.THIRD:
                raise ValueError("triads have no third inversion")
        elif self.quality not in SEVENTH_TEMPLATES.values():
            raise ValueError(f"{self.quality} is not a seventh quality")

    @property
    def condition(self) -> str:
        return f"{self.chord_type.value}:{self.quality.value}:{self.inversion.value}"


def classify(unit: HarmonicUnit) -> ChordClass | None:
    """Template match; None means Unclassified."""
    pcs = unit.pcs
    if len(pcs) == 3:
        templates, chord_type = TRIAD_TEMPLATES, ChordType.TRIAD
    elif len(pcs) == 4:
        templates, chord_type = SEVENTH_TEMPLATES, ChordType.SEVENTH
    else:
        return None
    matches = []
    for root in pcs:
        intervals = tuple(sorted((pc - root) % 12 for pc in pcs))
        quality = templates.get(intervals)
        if quality is not None:
            matches.append((root, quality))
    if not matches:
        return None
    qualities = {q for _, q in matches}
    if len(matches) > 1:
        # only the symmetric sonorities match multiple roots
        assert qualities <= _SYMMETRIC, (unit, matches)
    (root, quality) = matches[0]
    if quality in _SYMMETRIC:
        return ChordClass(chord_type, quality, Inversion.ROOT)
    inversion = _INVERSION_BY_INTERVAL[(unit.bass_pc - root) % 12]
    return ChordClass(chord_type, quality, inversion)


def sample_conditions(
    occurrences: dict[str, list], per_condition: int, rng: random.Random
) -> tuple[dict[str, list], list[str]]:
    """Uniform sample without replacement per condition.

    occurrences maps condition label -> occurrence list (any payload).
    Conditions with fewer than per_condition occurrences keep everything and
    are returned in the warnings list.
    """
    if per_condition < 1:
        raise ValueError("per_condition must be >= 1")
    sampled: dict[str, list] = {}
    warnings: list[str] = []
    for condition in sorted(occurrences):
        pool = occurrences[condition]
        if len(pool) <= per_condition:
            sampled[condition] = list(pool)
            if len(pool) < per_condition:
                warnings.append(
                    f"condition {condition}: only {len(pool)} occurrences "
                    f"(wanted {per_condition})"
                )
        else:
            sampled[condition] = rng.sample(pool, per_condition)
    return sampled, warnings
