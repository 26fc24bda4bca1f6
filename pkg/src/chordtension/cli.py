"""Command-line pipeline: ingest -> train -> tension -> classify -> exp1/exp2.

Every output file carries header comments with the tool version, a digest of
the effective configuration, and the seed, so any table can be traced back to
the run that produced it. Exit codes: 0 success, 1 runtime failure, 2 usage
error. ``--workers 1`` (the default) is the deterministic reference mode.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

import click

from . import __version__, vocab as vocab_mod
from .chord_catalog import classify
from .embedding import EmbeddingModel, TrainConfig, train, train_parallel
from .errors import ChordTensionError
from .experiments import (
    ExperimentConfig,
    load_annotations,
    run_experiment1,
    run_experiment2,
)
from .score_ingest import full_expansion, parse_events, parse_kern
from .tension import TensionConfig, series_to_csv_rows, tension_series
from .vocab import Vocabulary, build_corpus, read_sequences, write_onsets, write_sequences

KERN_SUFFIXES = {".krn", ".kern"}


def _config_digest(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _header_lines(digest: str, seed) -> list[str]:
    return [
        f"# chordtension {__version__}",
        f"# config_digest {digest}",
        f"# seed {seed}",
    ]


def _write_csv(path: Path, digest: str, seed, columns: list[str], rows) -> None:
    lines = _header_lines(digest, seed)
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(str(c) for c in row))
    path.write_text("\n".join(lines) + "\n")


def _apply_config_file(ctx: click.Context, values: dict) -> dict:
    """TOML config supplies values for options left at their defaults."""
    path = values.pop("config", None)
    if not path:
        return values
    file_cfg = tomllib.loads(Path(path).read_text())
    for key, val in file_cfg.items():
        key = key.replace("-", "_")
        if key not in values:
            raise click.UsageError(f"unknown config key {key!r}")
        source = ctx.get_parameter_source(key)
        if source is None or source.name == "DEFAULT":
            values[key] = val
    return values


def _load_archive(archive: Path):
    vocab = Vocabulary.from_text((archive / "vocab.tsv").read_text())
    sequences = read_sequences(
        (archive / "sequences.txt").read_text(), (archive / "onsets.txt").read_text()
    )
    return vocab, sequences


@click.group()
def cli():
    """Corpus-to-harmonic-tension toolkit."""


@cli.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--out", required=True, type=click.Path(path_type=Path))
@click.option("--pure-pcset", is_flag=True, help="Drop bass identity (ablation mode).")
def ingest(paths: tuple[Path, ...], out: Path, pure_pcset: bool):
    """Parse score files (kern or interchange) into a corpus archive."""
    files: list[Path] = []
    for p in paths:
        files.extend(sorted(p.rglob("*")) if p.is_dir() else [p])
    pieces = []
    failures = []
    for f in files:
        if f.is_dir():
            continue
        try:
            text = f.read_text()
            events = parse_kern(text) if f.suffix in KERN_SUFFIXES else parse_events(text)
            pieces.append((f.stem, full_expansion(events)))
        except (ChordTensionError, UnicodeDecodeError) as exc:
            failures.append(f"{f}: {exc}")
    for msg in failures:
        click.echo(f"warning: {msg}", err=True)
    if not pieces:
        raise click.ClickException("no file could be parsed")
    vocab, sequences = build_corpus(pieces, pure_pcset=pure_pcset)
    out.mkdir(parents=True, exist_ok=True)
    (out / "vocab.tsv").write_text(vocab.to_text())
    (out / "sequences.txt").write_text(write_sequences(sequences))
    (out / "onsets.txt").write_text(write_onsets(sequences))
    meta = {
        "pieces": len(pieces),
        "sequences": len(sequences),
        "units": sum(len(s.ids) for s in sequences),
        "vocab_size": len(vocab),
        "pure_pcset": pure_pcset,
        "vocab_digest": vocab.digest(),
        "failures": failures,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    click.echo(
        f"pieces {meta['pieces']}  sequences {meta['sequences']}  "
        f"units {meta['units']}  vocabulary {meta['vocab_size']}"
    )


def train_options(f):
    for opt in reversed(
        [
            click.option("--dim", default=120, show_default=True),
            click.option("--window", default=6, show_default=True),
            click.option("--min-count", default=1, show_default=True),
            click.option("--negatives", default=5, show_default=True),
            click.option("--epochs", default=5, show_default=True),
            click.option("--initial-lr", default=0.025, show_default=True),
            click.option("--subsample", default=0.0, show_default=True),
            click.option("--seed", default=1, show_default=True),
            click.option("--workers", default=1, show_default=True),
        ]
    ):
        f = opt(f)
    return f


def _train_config(values: dict) -> TrainConfig:
    return TrainConfig(
        dim=values["dim"],
        window=values["window"],
        min_count=values["min_count"],
        negatives=values["negatives"],
        epochs=values["epochs"],
        initial_lr=values["initial_lr"],
        subsample=values["subsample"],
        seed=values["seed"],
    )


@cli.command(name="train")
@click.argument("archive", type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--out", required=True, type=click.Path(path_type=Path))
@click.option("--config", type=click.Path(exists=True, path_type=Path))
@train_options
@click.pass_context
def train_cmd(ctx, archive: Path, out: Path, **values):
    """Train CBOW embeddings over a corpus archive."""
    values = _apply_config_file(ctx, values)
    workers = values["workers"]
    cfg = _train_config(values)
    vocab, sequences = _load_archive(archive)
    model = (
        train_parallel(sequences, vocab, cfg, workers=workers)
        if workers > 1
        else train(sequences, vocab, cfg)
    )
    model.save(out)
    click.echo(
        f"trained V={model.vocab_size} D={cfg.dim} "
        f"probe_loss {model.metadata['probe_loss_before']:.4f} -> "
        f"{model.metadata['probe_loss_after']:.4f}"
    )


@cli.command()
@click.argument("archive", type=click.Path(exists=True, path_type=Path))
@click.argument("model_path", type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--out", required=True, type=click.Path(path_type=Path))
@click.option("--memory", "n", default=24, show_default=True, help="Memory length n.")
@click.option("--literal-normalization", is_flag=True, help="Divide by n even for t < n.")
@click.option("--transposed/--untransposed-only", default=False, show_default=True)
def tension(archive: Path, model_path: Path, out: Path, n: int,
            literal_normalization: bool, transposed: bool):
    """Tension CSV for every harmonic unit of every piece."""
    vocab, sequences = _load_archive(archive)
    model = EmbeddingModel.load(model_path, vocab=vocab)
    cfg = TensionConfig(n=n, normalize_partial=not literal_normalization)
    digest = _config_digest({"n": n, "normalize_partial": cfg.normalize_partial,
                             "model": model.vocab_hash})
    rows = []
    for seq in sequences:
        if not transposed and seq.transposition != 0:
            continue
        rows.extend(series_to_csv_rows(tension_series(model, seq, cfg), seq))
    _write_csv(out, digest, model.config.seed,
               ["piece_id", "transposition", "unit_index", "onset", "tension"], rows)
    click.echo(f"wrote {len(rows)} tension rows to {out}")


@cli.command(name="classify")
@click.argument("archive", type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--out", required=True, type=click.Path(path_type=Path))
def classify_cmd(archive: Path, out: Path):
    """Chord-class CSV for the untransposed sequence of every piece."""
    vocab, sequences = _load_archive(archive)
    class_by_id = {uid: classify(u) for uid, u in enumerate(vocab.id_to_unit)}
    rows = []
    for seq in sequences:
        if seq.transposition != 0:
            continue
        for t, uid in enumerate(seq.ids):
            cls = class_by_id[uid]
            if cls is None:
                rows.append((seq.piece_id, t, "unclassified", "", ""))
            else:
                rows.append((seq.piece_id, t, cls.chord_type.value,
                             cls.quality.value, cls.inversion.value))
    digest = _config_digest({"vocab": vocab.digest()})
    _write_csv(out, digest, "-", ["piece_id", "unit_index", "type", "quality", "inversion"], rows)
    click.echo(f"wrote {len(rows)} classification rows to {out}")


def experiment_options(f):
    for opt in reversed(
        [
            click.option("--folds", default=10, show_default=True),
            click.option("--per-condition", default=1200, show_default=True),
            click.option("--baseline-size", default=1200, show_default=True),
            click.option("--memory", default=24, show_default=True, help="Tension memory n."),
            click.option("--literal-normalization", is_flag=True),
            click.option("--single-model", is_flag=True, help="Fast smoke mode."),
        ]
    ):
        f = opt(f)
    return train_options(f)


def _experiment_config(values: dict) -> tuple[ExperimentConfig, str]:
    cfg = ExperimentConfig(
        train=_train_config(values),
        tension=TensionConfig(
            n=values["memory"], normalize_partial=not values["literal_normalization"]
        ),
        folds=values["folds"],
        per_condition=values["per_condition"],
        baseline_size=values["baseline_size"],
        seed=values["seed"],
        single_model=values["single_model"],
        workers=values["workers"],
    )
    digest = _config_digest(
        {**values, "version": __version__}
    )
    return cfg, digest


def _write_experiment(outdir: Path, digest: str, seed: int, result, row_columns):
    outdir.mkdir(parents=True, exist_ok=True)
    _write_csv(
        outdir / "groups.csv", digest, seed, ["group", "mean", "se", "count"],
        [(g.group, repr(g.mean), repr(g.se), g.count) for g in result.condition_table],
    )
    for name, table in result.group_tables.items():
        _write_csv(
            outdir / f"groups_{name}.csv", digest, seed, ["group", "mean", "se", "count"],
            [(g.group, repr(g.mean), repr(g.se), g.count) for g in table],
        )
    _write_csv(outdir / "chords.csv", digest, seed, row_columns, result.rows)
    report = {
        "version": __version__,
        "config_digest": digest,
        "seed": seed,
        "warnings": result.warnings,
        "tests": [t.to_dict() for t in result.tests],
    }
    (outdir / "tests.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    for w in result.warnings:
        click.echo(f"warning: {w}", err=True)


@cli.command()
@click.argument("archive", type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--out", "outdir", required=True, type=click.Path(path_type=Path))
@click.option("--config", type=click.Path(exists=True, path_type=Path))
@experiment_options
@click.pass_context
def exp1(ctx, archive: Path, outdir: Path, **values):
    """Chord-category tension experiment (10-fold CV)."""
    values = _apply_config_file(ctx, values)
    cfg, digest = _experiment_config(values)
    vocab, sequences = _load_archive(archive)
    result = run_experiment1(vocab, sequences, cfg)
    _write_experiment(outdir, digest, cfg.seed, result,
                      ["piece_id", "unit_index", "condition", "tension"])
    click.echo(f"experiment 1 results in {outdir}")


@cli.command()
@click.argument("archive", type=click.Path(exists=True, path_type=Path))
@click.argument("annotations", type=click.Path(exists=True, path_type=Path))
@click.option("-o", "--out", "outdir", required=True, type=click.Path(path_type=Path))
@click.option("--config", type=click.Path(exists=True, path_type=Path))
@experiment_options
@click.pass_context
def exp2(ctx, archive: Path, annotations: Path, outdir: Path, **values):
    """Cadence terminal-chord tension experiment (10-fold CV)."""
    values = _apply_config_file(ctx, values)
    cfg, digest = _experiment_config(values)
    vocab, sequences = _load_archive(archive)
    anns = load_annotations(annotations.read_text())
    result = run_experiment2(vocab, sequences, anns, cfg)
    _write_experiment(outdir, digest, cfg.seed, result,
                      ["piece_id", "unit_index", "category", "tension"])
    click.echo(f"experiment 2 results in {outdir}")


@cli.command()
@click.argument("outdir", type=click.Path(exists=True, path_type=Path))
def report(outdir: Path):
    """Summarize a tests.json results file."""
    data = json.loads((outdir / "tests.json").read_text())
    click.echo(f"run {data['config_digest']} (seed {data['seed']})")
    for t in data["tests"]:
        df = t["df"]
        df_s = ",".join(f"{d:g}" for d in df) if isinstance(df, list) else f"{df:g}"
        verdict = "SIGNIFICANT" if t["significant"] else "ns"
        click.echo(
            f"{t['test']:<40} stat {t['statistic']:>9.4f}  df {df_s:>12}  "
            f"p {t['p']:.3g}  alpha {t['alpha_effective']:.4g}  {verdict}"
        )
    for w in data.get("warnings", []):
        click.echo(f"warning: {w}")


def main():
    try:
        cli.main(standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(1)
    except click.exceptions.Abort:
        sys.exit(1)
    except ChordTensionError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


if __name__ == "__main__":
    main()
