"""End-to-end command-line tests, run through the installed entry point so
exit codes and stream separation are exercised exactly as a user sees them."""

import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from chordtension.embedding import EmbeddingModel, init_matrices

DATA = Path(__file__).parent / "data"
KERN_PIECE = "**kern\n4c 4e 4g\n4f 4a 4cc\n4g 4b 4dd\n4c 4e 4g\n*-\n"
KERN_PIECE2 = "**kern\n4d 4f 4a\n4g 4b 4dd\n4c 4e 4g\n*-\n"


def run_cli(*args, cwd=None):
    exe = shutil.which("chordtension")
    assert exe, "entry point not installed"
    return subprocess.run(
        [exe, *map(str, args)], capture_output=True, text=True, cwd=cwd
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Shared archive + tiny model used by most commands."""
    root = tmp_path_factory.mktemp("cli")
    (root / "a.krn").write_text(KERN_PIECE)
    (root / "b.krn").write_text(KERN_PIECE2)
    res = run_cli("ingest", root / "a.krn", root / "b.krn", "-o", root / "archive")
    assert res.returncode == 0, res.stderr
    res = run_cli(
        "train", root / "archive", "-o", root / "model.bin",
        "--dim", 8, "--epochs", 1, "--seed", 3,
    )
    assert res.returncode == 0, res.stderr
    return root


class TestIngest:
    def test_counts_two_pieces(self, workdir):
        assert (workdir / "archive" / "vocab.tsv").exists()
        meta = json.loads((workdir / "archive" / "meta.json").read_text())
        assert meta["pieces"] == 2
        assert meta["sequences"] == 24  # 12 transpositions per piece
        assert meta["failures"] == []

    def test_invalid_file_warns_but_continues(self, tmp_path):
        (tmp_path / "good.krn").write_text(KERN_PIECE)
        (tmp_path / "bad.krn").write_text("**kern\n*^\n4c\n*-\n")
        res = run_cli("ingest", tmp_path / "good.krn", tmp_path / "bad.krn",
                      "-o", tmp_path / "out")
        assert res.returncode == 0
        assert "warning" in res.stderr
        meta = json.loads((tmp_path / "out" / "meta.json").read_text())
        assert meta["pieces"] == 1
        assert len(meta["failures"]) == 1

    def test_all_invalid_fails(self, tmp_path):
        (tmp_path / "bad.krn").write_text("**kern\n*^\n4c\n*-\n")
        res = run_cli("ingest", tmp_path / "bad.krn", "-o", tmp_path / "out")
        assert res.returncode == 1

    def test_missing_arguments_usage_error(self):
        res = run_cli("ingest")
        assert res.returncode == 2

    def test_missing_input_path_usage_error(self, tmp_path):
        res = run_cli("ingest", tmp_path / "nope.krn", "-o", tmp_path / "out")
        assert res.returncode == 2


class TestTrain:
    def test_epochs_zero_equals_initialization(self, workdir, tmp_path):
        res = run_cli("train", workdir / "archive", "-o", tmp_path / "m.bin",
                      "--dim", 8, "--epochs", 0, "--seed", 3)
        assert res.returncode == 0
        model = EmbeddingModel.load(tmp_path / "m.bin")
        syn0, syn1 = init_matrices(model.vocab_size, 8, 3)
        assert np.array_equal(model.input_vectors, syn0)
        assert np.array_equal(model.output_vectors, syn1)

    def test_default_hyperparameters_recorded(self, workdir, tmp_path):
        res = run_cli("train", workdir / "archive", "-o", tmp_path / "m.bin",
                      "--epochs", 0)
        assert res.returncode == 0
        model = EmbeddingModel.load(tmp_path / "m.bin")
        assert model.config.dim == 120
        assert model.config.window == 6
        assert model.config.min_count == 1

    def test_toml_config_fills_defaults(self, workdir, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('dim = 10\nepochs = 0\n')
        res = run_cli("train", workdir / "archive", "-o", tmp_path / "m.bin",
                      "--config", cfg)
        assert res.returncode == 0
        assert EmbeddingModel.load(tmp_path / "m.bin").config.dim == 10

    def test_cli_flag_overrides_toml(self, workdir, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('dim = 10\nepochs = 0\n')
        res = run_cli("train", workdir / "archive", "-o", tmp_path / "m.bin",
                      "--config", cfg, "--dim", 12)
        assert res.returncode == 0
        assert EmbeddingModel.load(tmp_path / "m.bin").config.dim == 12

    def test_unknown_toml_key_usage_error(self, workdir, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('dimension = 10\n')
        res = run_cli("train", workdir / "archive", "-o", tmp_path / "m.bin",
                      "--config", cfg)
        assert res.returncode == 2


class TestTension:
    def test_minimal_piece_yields_one_row(self, tmp_path):
        (tmp_path / "tiny.krn").write_text("**kern\n4c 4e 4g\n4g 4b 4dd\n*-\n")
        assert run_cli("ingest", tmp_path / "tiny.krn", "-o", tmp_path / "a").returncode == 0
        assert run_cli("train", tmp_path / "a", "-o", tmp_path / "m.bin",
                       "--dim", 4, "--epochs", 0).returncode == 0
        res = run_cli("tension", tmp_path / "a", tmp_path / "m.bin",
                      "-o", tmp_path / "t.csv")
        assert res.returncode == 0
        lines = (tmp_path / "t.csv").read_text().splitlines()
        assert lines[0].startswith("# chordtension ")
        assert lines[1].startswith("# config_digest ")
        assert lines[2].startswith("# seed ")
        assert lines[3] == "piece_id,transposition,unit_index,onset,tension"
        assert len(lines) == 5  # one data row: unit 1 of the only piece

    def test_vocab_digest_mismatch_rejected(self, workdir, tmp_path):
        (tmp_path / "other.krn").write_text("**kern\n4d 4f 4a\n4e 4g 4b\n*-\n")
        assert run_cli("ingest", tmp_path / "other.krn", "-o", tmp_path / "a2").returncode == 0
        res = run_cli("tension", tmp_path / "a2", workdir / "model.bin",
                      "-o", tmp_path / "t.csv")
        assert res.returncode == 1
        assert "error" in res.stderr.lower()

    def test_transposed_flag_multiplies_rows(self, workdir, tmp_path):
        base = run_cli("tension", workdir / "archive", workdir / "model.bin",
                       "-o", tmp_path / "base.csv")
        full = run_cli("tension", workdir / "archive", workdir / "model.bin",
                       "-o", tmp_path / "full.csv", "--transposed")
        assert base.returncode == 0 and full.returncode == 0
        n_base = len((tmp_path / "base.csv").read_text().splitlines()) - 4
        n_full = len((tmp_path / "full.csv").read_text().splitlines()) - 4
        assert n_full == 12 * n_base


class TestClassify:
    def test_rows_cover_untransposed_units(self, workdir, tmp_path):
        res = run_cli("classify", workdir / "archive", "-o", tmp_path / "c.csv")
        assert res.returncode == 0
        rows = [l for l in (tmp_path / "c.csv").read_text().splitlines()
                if not l.startswith("#")][1:]
        assert len(rows) == 4 + 3  # every unit of both pieces
        assert rows[0].split(",")[2:] == ["triad", "major", "root"]


class TestExperiments:
    def test_exp1_golden_outputs(self, tmp_path):
        assert run_cli("ingest", DATA / "corpus", "-o", tmp_path / "archive").returncode == 0
        res = run_cli("exp1", tmp_path / "archive", "-o", tmp_path / "out",
                      "--single-model", "--dim", 24, "--epochs", 2,
                      "--per-condition", 50, "--seed", 1)
        assert res.returncode == 0, res.stderr
        expected_dir = DATA / "expected_exp1"
        for name in sorted(p.name for p in expected_dir.iterdir()):
            produced = (tmp_path / "out" / name).read_bytes()
            expected = (expected_dir / name).read_bytes()
            assert produced == expected, f"{name} differs from committed output"

    def test_exp2_missing_annotations_usage_error(self, workdir, tmp_path):
        res = run_cli("exp2", workdir / "archive", tmp_path / "missing.csv",
                      "-o", tmp_path / "out")
        assert res.returncode == 2

    def test_report_summarizes_tests(self, tmp_path):
        res = run_cli("report", DATA / "expected_exp1")
        assert res.returncode == 0
        data = json.loads((DATA / "expected_exp1" / "tests.json").read_text())
        for t in data["tests"]:
            assert t["test"] in res.stdout
        assert data["config_digest"] in res.stdout
