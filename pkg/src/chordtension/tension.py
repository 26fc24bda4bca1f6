"""Harmonic-tension estimation.

The tension of a unit is the negated weighted mean cosine similarity between
its embedding vector and the vectors of up to n preceding units, with an
exponential memory-decay weight favoring recent units:

    weight(i) = 1 - e^(1 - n/(i-1))      (weight(1) = 1, the right limit)

A value near -1 means the unit sits squarely in its preceding context
(minimum tension); values near 0 mean maximum tension. Positive values are
possible when cosines go negative; the formula is applied as defined.

For early positions (t < n) the default normalizes by the weight mass
actually used; ``normalize_partial=False`` divides by n regardless, which
matches the formula taken literally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .embedding import EmbeddingModel
from .errors import NoPrecedingContext, SequenceTooShort
from .vocab import PieceSequence


@dataclass
class TensionConfig:
    n: int = 24  # memory length in harmonic units
    normalize_partial: bool = True

    def validate(self) -> None:
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass
class TensionSeries:
    piece_id: str
    transposition: int
    values: list[float | None]  # values[0] is undefined (None)
    config: TensionConfig = field(default_factory=TensionConfig)

    def defined(self) -> list[float]:
        return [v for v in self.values if v is not None]


def decay_weight(i: int, n: int) -> float:
    """Memory-decay weight for the i-th preceding unit, i in 1..n."""
    if not 1 <= i <= n:
        raise ValueError(f"i={i} outside 1..{n}")
    if i == 1:
        return 1.0
    return 1.0 - math.exp(1.0 - n / (i - 1))


def _normalized_rows(model: EmbeddingModel) -> np.ndarray:
    x = model.input_vectors.astype(np.float64)
    norms = np.linalg.norm(x, axis=1)
    nonzero = norms > 0
    x[nonzero] /= norms[nonzero, None]
    x[~nonzero] = 0.0
    return x


def tension_at(
    model: EmbeddingModel, ids: list[int], t: int, cfg: TensionConfig | None = None
) -> float:
    cfg = cfg or TensionConfig()
    cfg.validate()
    if t < 1:
        raise NoPrecedingContext(f"t={t} has no preceding unit")
    if t >= len(ids):
        raise IndexError(f"t={t} outside sequence of length {len(ids)}")
    m = min(cfg.n, t)
    acc = 0.0
    weight_mass = 0.0
    for i in range(1, m + 1):
        w = decay_weight(i, cfg.n)
        acc += model.cosine(ids[t - i], ids[t]) * w
        weight_mass += w
    z = weight_mass if cfg.normalize_partial else float(cfg.n)
    return -acc / z


def tension_series(
    model: EmbeddingModel, sequence: PieceSequence, cfg: TensionConfig | None = None
) -> TensionSeries:
    cfg = cfg or TensionConfig()
    cfg.validate()
    if len(sequence.ids) < 2:
        raise SequenceTooShort(
            f"piece {sequence.piece_id!r}: need >= 2 units, got {len(sequence.ids)}"
        )
    # precompute unit-normalized vectors so the per-t loop is a dot product;
    # agrees with tension_at up to float64 rounding
    normed = _normalized_rows(model)
    ids = np.asarray(sequence.ids, dtype=np.int64)
    weights = np.array([decay_weight(i, cfg.n) for i in range(1, cfg.n + 1)])
    masses = np.cumsum(weights)
    values: list[float | None] = [None]
    for t in range(1, len(ids)):
        m = min(cfg.n, t)
        cosines = normed[ids[t - m : t][::-1]] @ normed[ids[t]]
        z = masses[m - 1] if cfg.normalize_partial else float(cfg.n)
        values.append(float(-(weights[:m] @ cosines) / z))
    return TensionSeries(
        piece_id=sequence.piece_id,
        transposition=sequence.transposition,
        values=values,
        config=cfg,
    )


def series_to_csv_rows(series: TensionSeries, sequence: PieceSequence):
    """Rows ``piece_id,transposition,unit_index,onset,tension`` (defined t only)."""
    for t, value in enumerate(series.values):
        if value is None:
            continue
        yield (
            series.piece_id,
            series.transposition,
            t,
            str(sequence.unit_onsets[t]),
            repr(value),
        )
