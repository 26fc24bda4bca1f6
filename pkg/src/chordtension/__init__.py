"""Corpus-to-harmonic-tension toolkit.

Learns a distributed representation of chords from symbolic scores (CBOW
negative sampling over full-expansion harmonic units) and derives a
memory-decayed tension estimate for every unit, plus the chord-category and
cadence experiments built on top.
"""

__version__ = "0.1.0"

from .embedding import EmbeddingModel, TrainConfig, train
from .score_ingest import NoteEvent, Slice, full_expansion, parse_events, parse_kern
from .tension import TensionConfig, decay_weight, tension_at, tension_series
from .vocab import HarmonicUnit, PieceSequence, Vocabulary, build_corpus

__all__ = [
    "EmbeddingModel",
    "HarmonicUnit",
    "NoteEvent",
    "PieceSequence",
    "Slice",
    "TensionConfig",
    "TrainConfig",
    "Vocabulary",
    "build_corpus",
    "decay_weight",
    "full_expansion",
    "parse_events",
    "parse_kern",
    "tension_at",
    "tension_series",
    "train",
]
