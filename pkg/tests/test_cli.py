"""End-to-end tests of the molguide command line."""

import json
import logging

import pandas as pd
import pytest
from click.testing import CliRunner

from molguide.__main__ import main
from molguide.utils.config import LOG_LEVEL
from molguide.utils.logger import PACKAGE_LOGGER, console_level, get_logger

from tests.conftest import DRUGLIKE_SMILES, IN_WINDOW_SMILES


def body_lines(path):
    return [line for line in path.read_text(encoding="utf-8").splitlines() if not line.startswith("#")]


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def run_config(tmp_path, tiny_config, smiles_file):
    """Config file for a tiny float64 run rooted in tmp_path."""
    labeled = tmp_path / "labeled.csv"
    small = [s for s in DRUGLIKE_SMILES if s not in ("CN1C=NC2=C1C(=O)N(C(=O)N2C)C", "CC(C)Cc1ccc(cc1)C(C)C(=O)O")]
    labeled.write_text(
        "smiles,HIV_active\n" + "".join(f"{s},{i % 2}\n" for i, s in enumerate(small)), encoding="utf-8"
    )
    data = tiny_config.to_dict()
    data.update(train_path=str(smiles_file), classifier_path=str(labeled), output_dir=str(tmp_path / "runs"))
    path = tmp_path / "run.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


@pytest.fixture
def drug_files(tmp_path):
    drugs = tmp_path / "drugs.smi"
    drugs.write_text("\n".join(IN_WINDOW_SMILES) + "\n", encoding="utf-8")
    unrelated = tmp_path / "unrelated.smi"
    unrelated.write_text("C\nCC\nO\n", encoding="utf-8")
    return drugs, unrelated


def invoke(runner, *args):
    return runner.invoke(main, [str(a) for a in args])


class TestUsage:
    """Usage errors exit with code 1."""

    def test_version(self, runner):
        result = invoke(runner, "--version")
        assert result.exit_code == 0
        assert "molguide" in result.output

    def test_missing_required_option(self, runner):
        assert invoke(runner, "sample").exit_code == 1

    def test_unknown_command(self, runner):
        assert invoke(runner, "bogus").exit_code == 1

    def test_bad_config_field(self, runner, tmp_path, smiles_file):
        path = tmp_path / "bad.json"
        path.write_text('{"temperature": 1}', encoding="utf-8")
        result = invoke(runner, "dataset-stats", "--config", path, "--in", smiles_file)
        assert result.exit_code == 1
        assert "error[ConfigError]" in result.output

    def test_bad_width(self, runner, tmp_path, smiles_file):
        result = invoke(runner, "fingerprint", "--in", smiles_file, "--width", 100, "--out-dir", tmp_path)
        assert result.exit_code == 1

    def test_bad_sources(self, runner, drug_files, tmp_path):
        drugs, _ = drug_files
        result = invoke(runner, "analyze-degradation", "--drugs", drugs, "--sources", "nopath", "--out-dir", tmp_path)
        assert result.exit_code == 1
        assert "error[ConfigError]" in result.output


class TestLogging:
    """Verbosity flags and the package logger."""

    def test_module_loggers_share_package_handlers(self):
        assert get_logger("molguide.core.training").name == "molguide.core.training"
        assert get_logger("scripts.run").name == "molguide.scripts.run"
        assert get_logger("scripts.run").handlers == []
        assert logging.getLogger(PACKAGE_LOGGER).handlers

    @pytest.mark.parametrize("flag,level", [("-v", logging.DEBUG), ("-q", logging.WARNING)])
    def test_flags_set_console_level(self, runner, smiles_file, tmp_path, flag, level):
        result = invoke(runner, flag, "dataset-stats", "--in", smiles_file, "--out-dir", tmp_path)
        assert result.exit_code == 0, result.output
        assert console_level() == level
        invoke(runner, "dataset-stats", "--in", smiles_file, "--out-dir", tmp_path)
        assert console_level() == logging.getLevelName(LOG_LEVEL)


class TestScreen:
    """The screen command and its exit codes."""

    def test_training_equals_generated_gives_100(self, runner, drug_files, tmp_path):
        drugs, _ = drug_files
        out = tmp_path / "out"
        result = invoke(
            runner, "screen", "--drugs", drugs, "--train", drugs, "--generated", drugs,
            "--top-pairs", 2, "--out-dir", out,
        )
        assert result.exit_code == 0, result.output
        assert "DrugIndex: 100.00%" in result.output
        summary = pd.read_csv(out / "screen_summary.csv", comment="#")
        assert summary["drug_like_generated"].tolist() == [1.0]
        assert len(pd.read_csv(out / "screen_top_pairs.csv", comment="#")) == 2
        per_molecule = pd.read_csv(out / "screen_generated.csv", comment="#")
        assert per_molecule["best_similarity"].tolist() == [1.0, 1.0, 1.0]

    def test_undefined_drug_index(self, runner, drug_files, tmp_path):
        drugs, unrelated = drug_files
        result = invoke(
            runner, "screen", "--drugs", drugs, "--train", unrelated, "--generated", drugs, "--out-dir", tmp_path,
        )
        assert result.exit_code == 3
        assert "error[UndefinedMetricError]" in result.output

    def test_no_valid_molecules(self, runner, drug_files, tmp_path):
        drugs, _ = drug_files
        bad = tmp_path / "bad.smi"
        bad.write_text("C(C)(C)(C)(C)C\n", encoding="utf-8")
        result = invoke(runner, "screen", "--drugs", drugs, "--train", drugs, "--generated", bad, "--out-dir", tmp_path)
        assert result.exit_code == 2
        assert "error[DatasetError]" in result.output


class TestDataCommands:
    """fingerprint, dataset-stats and analyze-degradation."""

    def test_fingerprint(self, runner, smiles_file, tmp_path):
        result = invoke(runner, "fingerprint", "--in", smiles_file, "--radius", 1, "--width", 256, "--out-dir", tmp_path)
        assert result.exit_code == 0, result.output
        lines = (tmp_path / "fingerprints.hex").read_text(encoding="utf-8").splitlines()
        assert "# radius=1 width=256" in lines
        rows = [line for line in lines if not line.startswith("#")]
        assert len(rows) == len(DRUGLIKE_SMILES)
        assert all(len(row.split("\t")[0]) == 64 for row in rows)

    def test_fingerprint_deterministic(self, runner, smiles_file, tmp_path):
        invoke(runner, "fingerprint", "--in", smiles_file, "--out-dir", tmp_path / "a")
        invoke(runner, "fingerprint", "--in", smiles_file, "--out-dir", tmp_path / "b")
        a = (tmp_path / "a" / "fingerprints.hex").read_bytes()
        assert a == (tmp_path / "b" / "fingerprints.hex").read_bytes()

    def test_dataset_stats(self, runner, smiles_file, tmp_path):
        result = invoke(runner, "dataset-stats", "--in", smiles_file, "--out-dir", tmp_path)
        assert result.exit_code == 0, result.output
        tally = pd.read_csv(tmp_path / "dataset_filter.csv", comment="#")
        assert dict(zip(tally["rule"], tally["count"])) == {"kept": 0, "weight_low": len(DRUGLIKE_SMILES)}
        marginals = pd.read_csv(tmp_path / "dataset_marginals.csv", comment="#")
        assert marginals.groupby("kind")["frequency"].sum().round(12).tolist() == [1.0, 1.0]

    def test_missing_input_file(self, runner, tmp_path):
        result = invoke(runner, "dataset-stats", "--in", tmp_path / "nope.smi")
        assert result.exit_code == 1

    def test_analyze_degradation(self, runner, drug_files, smiles_file, tmp_path):
        drugs, unrelated = drug_files
        config = tmp_path / "k.json"
        config.write_text('{"n_clusters": 2}', encoding="utf-8")
        result = invoke(
            runner, "analyze-degradation", "--config", config, "--drugs", drugs,
            "--sources", f"self={drugs},small={unrelated}", "--sources", f"mix={smiles_file}",
            "--out-dir", tmp_path / "deg",
        )
        assert result.exit_code == 0, result.output
        counts = pd.read_csv(tmp_path / "deg" / "degradation_counts.csv", comment="#")
        assert counts.columns.tolist() == ["cluster", "drugs", "self", "small", "mix"]
        assert counts["self"].tolist() == counts["drugs"].tolist()
        assert counts["small"].sum() == 0
        proportions = pd.read_csv(tmp_path / "deg" / "degradation_proportions.csv", comment="#")
        assert proportions["source"].tolist() == ["self", "small", "mix"]


class TestModelCommands:
    """Training, sampling and guidance through the CLI on a tiny model."""

    def test_train_and_sample(self, runner, run_config, smiles_file, tmp_path):
        result = invoke(runner, "train-diffusion", "--config", run_config)
        assert result.exit_code == 0, result.output
        runs = tmp_path / "runs"
        ckpt = runs / "denoiser.ckpt"
        assert ckpt.exists()
        loss = pd.read_csv(runs / "denoiser_loss.csv", comment="#")
        assert loss["step"].tolist() == [1, 2, 3]

        args = ["sample", "--config", run_config, "--checkpoint", ckpt, "--count", 4, "--seed", 0]
        first = invoke(runner, *args, "--out-dir", tmp_path / "s1", "--train", smiles_file)
        second = invoke(runner, *args, "--out-dir", tmp_path / "s2", "--train", smiles_file)
        assert first.exit_code == 0, first.output
        assert second.exit_code == 0, second.output
        a = (tmp_path / "s1" / "samples.smi").read_bytes()
        assert a == (tmp_path / "s2" / "samples.smi").read_bytes()
        report = pd.read_csv(tmp_path / "s1" / "samples_report.csv", comment="#")
        assert report["total"].tolist() == [4]
        assert len(body_lines(tmp_path / "s1" / "samples.smi")) == report["valid_count"][0]

        result = invoke(runner, "train-classifier", "--config", run_config, "--loss", "mse", "--checkpoint", ckpt)
        assert result.exit_code == 0, result.output
        classifier = runs / "classifier.ckpt"
        assert classifier.exists()
        assert (runs / "classifier_loss.csv").exists()

        guided = invoke(
            runner, *args, "--out-dir", tmp_path / "g0", "--classifier", classifier, "--lambda", 0,
        )
        assert guided.exit_code == 0, guided.output
        assert body_lines(tmp_path / "g0" / "samples.smi") == body_lines(tmp_path / "s1" / "samples.smi")

    def test_sample_corrupt_checkpoint(self, runner, tmp_path):
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(b"not a checkpoint")
        result = invoke(runner, "sample", "--checkpoint", bad, "--out-dir", tmp_path)
        assert result.exit_code == 2
        assert "error[CheckpointError]" in result.output

    def test_train_without_data_path(self, runner, tmp_path):
        result = invoke(runner, "train-diffusion", "--out-dir", tmp_path)
        assert result.exit_code == 1
        assert "error[ConfigError]" in result.output
