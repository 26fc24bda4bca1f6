"""Cross-validated tension experiments.

Experiment 1: per-fold, train embeddings on 9/10 of the pieces, compute
tension on the held-out pieces, classify every unit, sample up to
per_condition occurrences per chord condition, and test the four planned
hypotheses (inversion effects for major and minor triads, the quality trend,
triads vs sevenths) with a Bonferroni-corrected family of eight comparisons.

Experiment 2: same fold protocol, but the measured values are the tension
estimates of annotated cadence terminal chords (PAC / HC / DC), compared
against each other and against a random non-cadential baseline.

All tension measurements are taken on the untransposed sequence of each
piece; the transposed copies only ever serve as training data, and every
transposition of a piece shares its fold, so no held-out piece leaks into
training in any key.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from . import stats
from .chord_catalog import ChordClass, ChordType, Inversion, Quality, classify, sample_conditions
from .embedding import EmbeddingModel, TrainConfig, train, train_parallel
from .errors import IndexOutOfRange, TooFewPieces, UnknownPiece
from .tension import TensionConfig, tension_series
from .vocab import PieceSequence, Vocabulary

QUALITY_ORDER = (Quality.MAJOR, Quality.MINOR, Quality.DIMINISHED, Quality.AUGMENTED)
CADENCE_ORDER = ("PAC", "HC", "DC")


@dataclass
class FoldPlan:
    k: int
    assignments: dict[str, int]

    def fold_of(self, piece_id: str) -> int:
        return self.assignments[piece_id]

    def held_out(self, fold: int) -> list[str]:
        return sorted(p for p, f in self.assignments.items() if f == fold)


def make_folds(piece_ids: list[str], k: int, seed: int) -> FoldPlan:
    """Seeded partition into k folds whose sizes differ by at most one."""
    unique = list(dict.fromkeys(piece_ids))
    if k > len(unique):
        raise TooFewPieces(f"{len(unique)} pieces cannot fill {k} folds")
    rng = random.Random(seed)
    shuffled = list(unique)
    rng.shuffle(shuffled)
    return FoldPlan(k=k, assignments={p: i % k for i, p in enumerate(shuffled)})


@dataclass(frozen=True)
class CadenceAnnotation:
    piece_id: str
    terminal_unit_index: int
    category: str  # PAC | HC | DC

    def __post_init__(self):
        if self.category not in CADENCE_ORDER:
            raise ValueError(f"unknown cadence category {self.category!r}")


def load_annotations(text: str) -> list[CadenceAnnotation]:
    """CSV ``piece_id,terminal_unit_index,category``; ``#`` comments allowed."""
    annotations = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ValueError(f"line {line_no}: expected 3 fields")
        annotations.append(
            CadenceAnnotation(
                piece_id=parts[0],
                terminal_unit_index=int(parts[1]),
                category=parts[2].strip(),
            )
        )
    return annotations


@dataclass
class ExperimentConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    tension: TensionConfig = field(default_factory=TensionConfig)
    folds: int = 10
    per_condition: int = 1200
    baseline_size: int = 1200
    seed: int = 1
    single_model: bool = False  # smoke mode: one model, in-sample tension
    workers: int = 1


@dataclass
class GroupStat:
    group: str
    mean: float
    se: float
    count: int


@dataclass
class ExperimentResult:
    condition_table: list[GroupStat]
    group_tables: dict[str, list[GroupStat]]
    tests: list[stats.TestResult]
    rows: list[tuple]  # per-chord dump backing every reported mean
    warnings: list[str]


def _fold_tension_rows(vocab, sequences, cfg):
    """Train per fold and yield (piece_id, unit_index, unit_id, tension).

    Tension is measured on untransposed held-out sequences only; in
    single-model smoke mode one model scores everything in-sample.
    """
    piece_ids = sorted({s.piece_id for s in sequences})
    base_seqs = {
        s.piece_id: s for s in sequences if s.transposition == 0
    }
    def fit(seqs, train_cfg):
        if cfg.workers > 1:
            return train_parallel(seqs, vocab, train_cfg, workers=cfg.workers)
        return train(seqs, vocab, train_cfg)

    rows = []
    if cfg.single_model:
        model = fit(sequences, cfg.train)
        for piece_id in piece_ids:
            rows.extend(_score_piece(model, base_seqs[piece_id], cfg.tension))
        return rows, None
    plan = make_folds(piece_ids, cfg.folds, cfg.seed)
    for fold in range(cfg.folds):
        held = set(plan.held_out(fold))
        train_seqs = [s for s in sequences if s.piece_id not in held]
        fold_cfg = TrainConfig(**{**vars(cfg.train), "seed": cfg.train.seed + fold})
        model = fit(train_seqs, fold_cfg)
        for piece_id in sorted(held):
            rows.extend(_score_piece(model, base_seqs[piece_id], cfg.tension))
    return rows, plan


def _score_piece(model: EmbeddingModel, seq: PieceSequence, tension_cfg: TensionConfig):
    series = tension_series(model, seq, tension_cfg)
    return [
        (seq.piece_id, t, seq.ids[t], v)
        for t, v in enumerate(series.values)
        if v is not None
    ]


def _group_stat(label: str, values: list[float]) -> GroupStat:
    m, se = stats.mean_se(values)
    return GroupStat(group=label, mean=m, se=se, count=len(values))


def run_experiment1(
    vocab: Vocabulary, sequences: list[PieceSequence], cfg: ExperimentConfig
) -> ExperimentResult:
    """Chord-category tension: condition table plus the four planned tests."""
    tension_rows, _ = _fold_tension_rows(vocab, sequences, cfg)
    class_by_id: dict[int, ChordClass | None] = {
        uid: classify(unit) for uid, unit in enumerate(vocab.id_to_unit)
    }

    occurrences: dict[str, list] = {}
    for piece_id, t, uid, value in tension_rows:
        cls = class_by_id[uid]
        if cls is None:
            continue
        occurrences.setdefault(cls.condition, []).append((piece_id, t, cls, value))
    rng = random.Random(cfg.seed + 1)
    sampled, warnings = sample_conditions(occurrences, cfg.per_condition, rng)

    condition_table = []
    for condition in sorted(sampled):
        values = [r[3] for r in sampled[condition]]
        if len(values) < 2:
            warnings.append(f"condition {condition}: fewer than 2 samples, omitted")
            continue
        condition_table.append(_group_stat(condition, values))

    def values_where(pred) -> dict[str, list[float]]:
        out: dict[str, list[float]] = {}
        for condition, rows in sampled.items():
            for _, _, cls, value in rows:
                key = pred(cls)
                if key is not None:
                    out.setdefault(key, []).append(value)
        return out

    tests: list[stats.TestResult] = []
    group_tables: dict[str, list[GroupStat]] = {}
    alpha_family = stats.bonferroni_alpha(0.05, 8)  # 8 planned comparisons

    # H1/H2: inversion simple effects for major and minor triads
    for label, quality in (("H1_major_inversion", Quality.MAJOR), ("H2_minor_inversion", Quality.MINOR)):
        by_inv = values_where(
            lambda c, q=quality: c.inversion.value
            if c.chord_type is ChordType.TRIAD and c.quality is q
            else None
        )
        order = [i.value for i in (Inversion.ROOT, Inversion.FIRST, Inversion.SECOND)]
        present = [i for i in order if len(by_inv.get(i, [])) >= 2]
        group_tables[label] = [_group_stat(i, by_inv[i]) for i in present]
        if len(present) >= 2:
            groups = [by_inv[i] for i in present]
            omnibus = stats.oneway_anova(groups, labels=present)
            omnibus.test = f"{label}_anova"
            tests.append(omnibus)
            if "first" in present:
                for other in ("root", "second"):
                    if other in present:
                        r = stats.welch_t(
                            by_inv["first"],
                            by_inv[other],
                            alpha=alpha_family,
                            labels=(f"{label}:first", f"{label}:{other}"),
                        )
                        r.test = f"{label}_first_vs_{other}"
                        tests.append(r)

    # H3: quality trend over triads (major < minor < diminished < augmented)
    by_quality = values_where(
        lambda c: c.quality.value if c.chord_type is ChordType.TRIAD else None
    )
    q_present = [q.value for q in QUALITY_ORDER if len(by_quality.get(q.value, [])) >= 2]
    group_tables["H3_quality"] = [_group_stat(q, by_quality[q]) for q in q_present]
    if len(q_present) >= 2:
        omnibus = stats.oneway_anova([by_quality[q] for q in q_present], labels=q_present)
        omnibus.test = "H3_quality_anova"
        tests.append(omnibus)
        for r in stats.trend_contrast(
            [by_quality[q] for q in q_present], q_present, family_size=8
        ):
            r.test = f"H3_trend_{r.groups[0]}_vs_{r.groups[1]}"
            tests.append(r)

    # H4: triads vs sevenths
    by_type = values_where(lambda c: c.chord_type.value)
    group_tables["H4_type"] = [
        _group_stat(t, by_type[t])
        for t in (ChordType.TRIAD.value, ChordType.SEVENTH.value)
        if len(by_type.get(t, [])) >= 2
    ]
    if len(group_tables["H4_type"]) == 2:
        r = stats.welch_t(
            by_type[ChordType.TRIAD.value],
            by_type[ChordType.SEVENTH.value],
            alpha=alpha_family,
            labels=("triad", "seventh"),
        )
        r.test = "H4_triads_vs_sevenths"
        tests.append(r)

    rows = [r for condition in sorted(sampled) for r in sampled[condition]]
    dump = [(p, t, cls.condition, repr(v)) for p, t, cls, v in rows]
    return ExperimentResult(
        condition_table=condition_table,
        group_tables=group_tables,
        tests=tests,
        rows=dump,
        warnings=warnings,
    )


def run_experiment2(
    vocab: Vocabulary,
    sequences: list[PieceSequence],
    annotations: list[CadenceAnnotation],
    cfg: ExperimentConfig,
) -> ExperimentResult:
    """Cadence terminal-chord tension vs a random non-cadential baseline."""
    base_lengths = {
        s.piece_id: len(s.ids) for s in sequences if s.transposition == 0
    }
    terminal_keys = set()
    for ann in annotations:
        if ann.piece_id not in base_lengths:
            raise UnknownPiece(f"annotated piece {ann.piece_id!r} not in corpus")
        if not 1 <= ann.terminal_unit_index < base_lengths[ann.piece_id]:
            raise IndexOutOfRange(
                f"annotation {ann.piece_id!r}@{ann.terminal_unit_index}: "
                f"index outside 1..{base_lengths[ann.piece_id] - 1}"
            )
        terminal_keys.add((ann.piece_id, ann.terminal_unit_index))

    tension_rows, _ = _fold_tension_rows(vocab, sequences, cfg)
    by_key = {(p, t): v for p, t, _, v in tension_rows}

    by_category: dict[str, list[float]] = {c: [] for c in CADENCE_ORDER}
    for ann in annotations:
        by_category[ann.category].append(by_key[(ann.piece_id, ann.terminal_unit_index)])

    candidates = sorted(k for k in by_key if k not in terminal_keys)
    rng = random.Random(cfg.seed + 2)
    baseline_keys = (
        rng.sample(candidates, cfg.baseline_size)
        if len(candidates) > cfg.baseline_size
        else candidates
    )
    baseline = [by_key[k] for k in baseline_keys]

    warnings = []
    if len(candidates) < cfg.baseline_size:
        warnings.append(
            f"baseline: only {len(candidates)} non-cadential chords available "
            f"(wanted {cfg.baseline_size})"
        )

    present = [c for c in CADENCE_ORDER if len(by_category[c]) >= 2]
    table = [_group_stat(c, by_category[c]) for c in present]
    if len(baseline) >= 2:
        table.append(_group_stat("non_cadential", baseline))

    tests: list[stats.TestResult] = []
    alpha_family = stats.bonferroni_alpha(0.05, 5)  # 5 planned comparisons
    if "PAC" in present and len(baseline) >= 2:
        r = stats.welch_t(by_category["PAC"], baseline, alpha=alpha_family,
                          labels=("PAC", "non_cadential"))
        r.test = "H1_PAC_vs_noncadential"
        tests.append(r)
    if len(present) >= 2:
        omnibus = stats.oneway_anova([by_category[c] for c in present], labels=present)
        omnibus.test = "cadence_anova"
        tests.append(omnibus)
    for label, other in (("H2_PAC_vs_HC", "HC"), ("H3_PAC_vs_DC", "DC")):
        if "PAC" in present and other in present:
            r = stats.welch_t(by_category["PAC"], by_category[other],
                              alpha=alpha_family, labels=("PAC", other))
            r.test = label
            tests.append(r)
    if len(present) >= 2:
        for r in stats.trend_contrast(
            [by_category[c] for c in present], present, family_size=5
        ):
            r.test = f"H4_trend_{r.groups[0]}_vs_{r.groups[1]}"
            tests.append(r)

    dump = [
        (ann.piece_id, ann.terminal_unit_index, ann.category,
         repr(by_key[(ann.piece_id, ann.terminal_unit_index)]))
        for ann in annotations
    ] + [(p, t, "non_cadential", repr(by_key[(p, t)])) for p, t in baseline_keys]
    return ExperimentResult(
        condition_table=table,
        group_tables={"cadence": table},
        tests=tests,
        rows=dump,
        warnings=warnings,
    )
