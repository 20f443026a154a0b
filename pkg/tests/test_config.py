"""Tests for the JSON run configuration and the artifact writers."""

import json

import pandas as pd
import pytest

from molguide import __version__
from molguide.chem.fingerprint import Fingerprint, parse_fingerprints
from molguide.utils.config import ModelConfig, RunConfig, load_config
from molguide.utils.errors import ConfigError
from molguide.utils.output import (
    artifact_header,
    config_echo,
    write_csv,
    write_fingerprint_file,
    write_loss_trace,
    write_smiles_file,
)


def write_json(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestLoadConfig:
    """Loading and validating RunConfig from JSON."""

    def test_defaults(self):
        cfg = load_config(None)
        assert cfg == RunConfig()
        assert cfg.lambda_guidance == 1000.0
        assert cfg.screen_width == 2048

    def test_partial_file(self, tmp_path):
        cfg = load_config(write_json(tmp_path, {"seed": 3, "model": {"n_layers": 2}}))
        assert cfg.seed == 3
        assert cfg.model.n_layers == 2
        assert cfg.model.hidden_node == ModelConfig().hidden_node

    def test_int_accepted_for_float(self, tmp_path):
        assert load_config(write_json(tmp_path, {"lambda_guidance": 50})).lambda_guidance == 50

    @pytest.mark.parametrize("data", [
        {"unknown": 1},
        {"model": {"depth": 3}},
        {"seed": "zero"},
        {"seed": True},
        {"apply_filter": 1},
        {"model": {"n_heads": 1.5}},
        {"model": 4},
    ])
    def test_rejected_fields(self, tmp_path, data):
        with pytest.raises(ConfigError):
            load_config(write_json(tmp_path, data))

    @pytest.mark.parametrize("data", [
        {"diffusion_steps": 0},
        {"guidance_sign": 2},
        {"target_label": 2},
        {"lambda_guidance": -1.0},
        {"classifier_loss": "hinge"},
        {"dtype": "float16"},
        {"held_out_fraction": 1.0},
        {"screen_width": 1000},
        {"cluster_width": 32},
        {"model": {"hidden_node": 10, "n_heads": 4}},
    ])
    def test_out_of_range(self, tmp_path, data):
        with pytest.raises(ConfigError):
            load_config(write_json(tmp_path, data))

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{seed: 1", encoding="utf-8")
        with pytest.raises(ConfigError, match="Invalid JSON"):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")


class TestOverrides:
    """CLI-style overrides on top of a loaded config."""

    def test_none_ignored(self):
        cfg = RunConfig(seed=4).with_overrides(seed=None, lambda_guidance=10.0)
        assert cfg.seed == 4
        assert cfg.lambda_guidance == 10.0

    def test_unknown_override(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(temperature=1.0)

    def test_override_validated(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides(screen_width=100)

    def test_original_untouched(self):
        base = RunConfig()
        base.with_overrides(seed=9)
        assert base.seed == 0


class TestEcho:
    """Canonical config echo and artifact headers."""

    def test_echo_is_canonical_json(self):
        echo = RunConfig().echo()
        data = json.loads(echo)
        assert echo == json.dumps(data, sort_keys=True, separators=(",", ":"))
        assert data["model"]["n_heads"] == 4

    def test_echo_round_trip(self, tmp_path):
        cfg = RunConfig(seed=11, model=ModelConfig(n_layers=1))
        path = tmp_path / "echo.json"
        path.write_text(cfg.echo(), encoding="utf-8")
        assert load_config(path) == cfg

    def test_header(self):
        header = artifact_header("screen", {"b": 1, "a": 2})
        assert header.splitlines() == [
            f"# molguide {__version__}",
            "# command: screen",
            '# config: {"a":2,"b":1}',
        ]

    def test_config_echo_none(self):
        assert config_echo(None) == "{}"


class TestWriters:
    """Artifact files: header, body and deterministic bytes."""

    def test_smiles_file(self, tmp_path):
        path = write_smiles_file(tmp_path / "out" / "s.smi", ["CCO", "c1ccccc1"], "sample", RunConfig())
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].startswith("# molguide")
        assert lines[3:] == ["CCO", "c1ccccc1"]

    def test_csv_deterministic(self, tmp_path):
        frame = pd.DataFrame({"smiles": ["C,C", "CCO"], "value": [0.5, 1.0]})
        a = write_csv(tmp_path / "a.csv", frame, "screen").read_bytes()
        b = write_csv(tmp_path / "b.csv", frame, "screen").read_bytes()
        assert a == b
        assert b"\r\n" not in a
        assert a.decode("utf-8").splitlines()[3:] == ["smiles,value", '"C,C",0.5', "CCO,1.0"]

    def test_csv_readable_by_pandas(self, tmp_path):
        frame = pd.DataFrame({"x": [1, 2]})
        path = write_csv(tmp_path / "x.csv", frame, "dataset-stats")
        assert pd.read_csv(path, comment="#")["x"].tolist() == [1, 2]

    def test_loss_trace_full_precision(self, tmp_path):
        path = write_loss_trace(tmp_path / "loss.csv", [(1, 0.1), (2, 1 / 3)], "train-diffusion")
        back = pd.read_csv(path, comment="#")
        assert back["step"].tolist() == [1, 2]
        assert back["loss"].tolist() == [0.1, 1 / 3]

    def test_fingerprint_file(self, tmp_path):
        fps = [Fingerprint.from_indices([0, 5], 2, 64), Fingerprint.from_indices([63], 2, 64)]
        path = write_fingerprint_file(tmp_path / "fp.hex", fps, ["a", "b"], "fingerprint")
        parsed = parse_fingerprints(path.read_text(encoding="utf-8"))
        assert [f for f, _ in parsed] == fps
        assert [label for _, label in parsed] == ["a", "b"]
