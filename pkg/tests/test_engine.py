"""Tests for the checkpoint container and the generation engine."""

import numpy as np
import pytest
import torch

from molguide.chem.smiles import parse_smiles
from molguide.core.diffusion import (
    Marginals,
    NoiseSchedule,
    build_transitions,
    estimate_marginals,
    node_count_histogram,
)
from molguide.core.engine import (
    GenerationEngine,
    load_engine,
    network_checkpoint,
    network_from_checkpoint,
    transitions_from_checkpoint,
)
from molguide.core.guidance import GuidanceConfig
from molguide.core.training import new_network
from molguide.utils.container import (
    MAGIC,
    Checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from molguide.utils.errors import CheckpointError, ConfigError

from tests.conftest import DRUGLIKE_SMILES


@pytest.fixture
def molecules():
    graphs = [parse_smiles(s) for s in DRUGLIKE_SMILES]
    return [g for g in graphs if g.n <= 12]


@pytest.fixture
def process(molecules, tiny_config):
    marginals = estimate_marginals(molecules, tiny_config.max_nodes)
    return build_transitions(NoiseSchedule.cosine(tiny_config.diffusion_steps), marginals)


@pytest.fixture
def denoiser_ckpt(tmp_path, molecules, process, tiny_config):
    net = new_network(tiny_config, process, seed=0)
    histogram = node_count_histogram(molecules, tiny_config.max_nodes)
    ckpt = network_checkpoint("denoiser", net, process, tiny_config.to_dict(), histogram, {"steps": 0})
    return save_checkpoint(tmp_path / "denoiser.ckpt", ckpt)


@pytest.fixture
def classifier_ckpt(tmp_path, process, tiny_config):
    net = new_network(tiny_config, process, seed=1)
    ckpt = network_checkpoint("classifier", net, process, tiny_config.to_dict(), metadata={"loss": "mse"})
    return save_checkpoint(tmp_path / "classifier.ckpt", ckpt)


def small_checkpoint() -> Checkpoint:
    return Checkpoint(
        kind="denoiser",
        tensors={"w": np.arange(6, dtype=np.float64).reshape(2, 3), "b": np.array([1.5], dtype=np.float32)},
        config={"seed": 1},
        network={},
        space={"atom_classes": 7, "edge_classes": 5},
        schedule={"T": 5, "s": 0.008},
        marginals={"nodes": [1.0], "edges": [1.0]},
        node_histogram=[0, 1],
    )


class TestContainer:
    """Encoding, verification and corruption handling."""

    def test_decode_restores_tensors(self):
        ckpt = decode_checkpoint(encode_checkpoint(small_checkpoint()))
        assert list(ckpt.tensors) == ["w", "b"]
        assert ckpt.tensors["w"].dtype == np.float64
        assert ckpt.tensors["w"].tolist() == [[0.0, 1.0, 2.0], [3.0, 4.0, 5.0]]
        assert ckpt.tensors["b"].tolist() == [1.5]
        assert ckpt.node_histogram == [0, 1]
        assert ckpt.config == {"seed": 1}

    def test_starts_with_magic(self):
        assert encode_checkpoint(small_checkpoint()).startswith(MAGIC)

    def test_bad_magic(self):
        data = encode_checkpoint(small_checkpoint())
        with pytest.raises(CheckpointError, match="magic"):
            decode_checkpoint(b"X" + data[1:])

    def test_flipped_byte_detected(self):
        data = bytearray(encode_checkpoint(small_checkpoint()))
        data[len(MAGIC) + 20] ^= 0xFF
        with pytest.raises(CheckpointError, match="checksum"):
            decode_checkpoint(bytes(data))

    def test_truncated(self):
        with pytest.raises(CheckpointError):
            decode_checkpoint(MAGIC + b"\x00")

    def test_unsupported_dtype(self):
        ckpt = small_checkpoint()
        ckpt.tensors = {"x": np.array([1], dtype=np.int8)}
        with pytest.raises(CheckpointError):
            encode_checkpoint(ckpt)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / "nope.ckpt")


class TestNetworkCheckpoint:
    """Networks and diffusion processes survive a save and load."""

    def test_weights_and_process_restored(self, denoiser_ckpt, process, tiny_config):
        ckpt = load_checkpoint(denoiser_ckpt)
        net = network_from_checkpoint(ckpt)
        original = new_network(tiny_config, process, seed=0)
        for (name, a), b in zip(original.state_dict().items(), net.state_dict().values()):
            assert torch.equal(a, b), name
        restored = transitions_from_checkpoint(ckpt)
        assert np.array_equal(restored.edges.q_bar, process.edges.q_bar)
        assert restored.T == process.T

    def test_bad_process(self):
        ckpt = small_checkpoint()
        ckpt.schedule = {}
        with pytest.raises(CheckpointError):
            transitions_from_checkpoint(ckpt)

    def test_bad_network(self):
        with pytest.raises(CheckpointError):
            network_from_checkpoint(small_checkpoint())


class TestEngine:
    """Loading and sampling through the engine."""

    def test_sampling_is_deterministic(self, denoiser_ckpt):
        engine = load_engine(str(denoiser_ckpt))
        a = engine.sample(count=4, seed=3)
        b = engine.sample(count=4, seed=3)
        assert len(a) == 4
        for x, y in zip(a, b):
            assert x.atoms == y.atoms
            assert np.array_equal(x.bonds, y.bonds)

    def test_fixed_node_count(self, denoiser_ckpt):
        engine = load_engine(str(denoiser_ckpt), batch_size=2)
        assert all(g.n == 5 for g in engine.sample(count=3, seed=0, nodes=5))

    def test_sizes_follow_histogram(self, denoiser_ckpt, molecules):
        engine = load_engine(str(denoiser_ckpt))
        sizes = {g.n for g in molecules}
        assert all(g.n in sizes for g in engine.sample(count=6, seed=1))

    def test_lambda_zero_guidance_matches_unguided(self, denoiser_ckpt, classifier_ckpt):
        engine = load_engine(str(denoiser_ckpt), str(classifier_ckpt))
        assert engine.classifier_loss == "mse"
        plain = engine.sample(count=3, seed=5, nodes=4)
        guided = engine.sample(count=3, seed=5, nodes=4, guidance=GuidanceConfig(0.0))
        for x, y in zip(plain, guided):
            assert np.array_equal(x.bonds, y.bonds)
            assert x.atoms == y.atoms

    def test_guidance_without_classifier(self, denoiser_ckpt):
        engine = load_engine(str(denoiser_ckpt))
        with pytest.raises(ConfigError):
            engine.sample(count=1, seed=0, guidance=GuidanceConfig(10.0))

    def test_kind_mismatch(self, classifier_ckpt, denoiser_ckpt):
        with pytest.raises(CheckpointError):
            load_engine(str(classifier_ckpt))
        with pytest.raises(CheckpointError):
            load_engine(str(denoiser_ckpt), str(denoiser_ckpt))

    def test_classifier_from_other_process(self, tmp_path, denoiser_ckpt, tiny_config):
        other = build_transitions(
            NoiseSchedule.cosine(tiny_config.diffusion_steps),
            Marginals(np.full(7, 1 / 7), np.full(5, 1 / 5)),
        )
        net = new_network(tiny_config, other, seed=0)
        path = save_checkpoint(
            tmp_path / "other.ckpt", network_checkpoint("classifier", net, other, tiny_config.to_dict())
        )
        with pytest.raises(CheckpointError):
            load_engine(str(denoiser_ckpt), str(path))

    def test_bad_node_count(self, denoiser_ckpt):
        engine: GenerationEngine = load_engine(str(denoiser_ckpt))
        with pytest.raises(ConfigError):
            engine.sample(count=1, seed=0, nodes=0)
