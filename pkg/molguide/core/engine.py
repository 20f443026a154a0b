"""Generation engine: trained checkpoints bundled for sampling.

Usage:
    from molguide.core.engine import load_engine

    engine = load_engine("runs/denoiser.ckpt", classifier_path="runs/classifier.ckpt")
    molecules = engine.sample(count=100, seed=0, guidance=GuidanceConfig(lambda_guidance=1000))

Or build one directly from freshly trained networks:
    engine = GenerationEngine(denoiser, model, histogram)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import torch

from molguide.chem.graph import MolecularGraph
from molguide.core.denoiser import GraphTransformer, GraphTransformerConfig
from molguide.core.diffusion import (
    Marginals,
    NoiseSchedule,
    StateSpace,
    TransitionModel,
    build_transitions,
    sample_node_counts,
)
from molguide.core.guidance import ClassifierGuidance, GuidanceConfig
from molguide.core.sampler import sample_batch
from molguide.utils.config import BATCH_SIZE
from molguide.utils.container import Checkpoint, load_checkpoint
from molguide.utils.errors import CheckpointError, ConfigError
from molguide.utils.logger import get_logger

log = get_logger(__name__)


# ─── Checkpoint conversion ─────────────────────────────────────────


def network_checkpoint(
    kind: str,
    net: GraphTransformer,
    model: TransitionModel,
    config: dict,
    node_histogram: np.ndarray | list[int] = (),
    metadata: dict | None = None,
) -> Checkpoint:
    """Snapshot a network and the diffusion process it was trained on."""
    tensors = {name: t.detach().cpu().numpy().copy() for name, t in net.state_dict().items()}
    return Checkpoint(
        kind=kind,
        tensors=tensors,
        config=config,
        network=net.config.to_dict(),
        space=model.space.to_dict(),
        schedule=model.schedule.to_dict(),
        marginals=model.marginals.to_dict(),
        node_histogram=[int(c) for c in node_histogram],
        metadata=dict(metadata or {}),
    )


def transitions_from_checkpoint(ckpt: Checkpoint) -> TransitionModel:
    try:
        space = StateSpace(**ckpt.space)
        schedule = NoiseSchedule.from_dict(ckpt.schedule)
        marginals = Marginals(
            np.asarray(ckpt.marginals["nodes"], dtype=np.float64),
            np.asarray(ckpt.marginals["edges"], dtype=np.float64),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise CheckpointError(f"checkpoint has an invalid diffusion process: {e}") from e
    return build_transitions(schedule, marginals, space)


def network_from_checkpoint(ckpt: Checkpoint) -> GraphTransformer:
    """Rebuild the network with the stored weights (in eval mode)."""
    try:
        net = GraphTransformer(GraphTransformerConfig(**ckpt.network))
    except (TypeError, ConfigError) as e:
        raise CheckpointError(f"checkpoint has an invalid network config: {e}") from e
    dtypes = {a.dtype for a in ckpt.tensors.values()}
    if dtypes == {np.dtype("float64")}:
        net = net.double()
    state = {name: torch.from_numpy(np.array(a)) for name, a in ckpt.tensors.items()}
    try:
        net.load_state_dict(state)
    except RuntimeError as e:
        raise CheckpointError(f"checkpoint weights do not match the network: {e}") from e
    net.eval()
    return net


def _same_process(a: Checkpoint, b: Checkpoint) -> bool:
    return a.space == b.space and a.schedule == b.schedule and a.marginals == b.marginals


# ─── Engine ────────────────────────────────────────────────────────


@dataclass
class GenerationEngine:
    """A denoiser, its diffusion process, and an optional guidance classifier."""
    denoiser: GraphTransformer
    model: TransitionModel
    node_histogram: np.ndarray
    classifier: GraphTransformer | None = None
    classifier_loss: str = "bce"
    batch_size: int = BATCH_SIZE
    metadata: dict = field(default_factory=dict)

    def guidance(self, cfg: GuidanceConfig | None) -> ClassifierGuidance | None:
        if cfg is None:
            return None
        if self.classifier is None:
            raise ConfigError("guidance requested but no classifier checkpoint was loaded")
        return ClassifierGuidance(self.classifier, cfg, self.model.T, self.classifier_loss)

    def sample(
        self,
        count: int,
        seed: int,
        guidance: GuidanceConfig | None = None,
        nodes: int | None = None,
    ) -> list[MolecularGraph]:
        """Sample ``count`` molecules; node counts come from the histogram unless fixed.

        Chains of equal size run together in batches. The output order
        follows the drawn node counts.
        """
        rng = np.random.default_rng(seed)
        if nodes is not None:
            sizes = np.full(count, nodes, dtype=np.int64)
        else:
            sizes = sample_node_counts(self.node_histogram, count, rng)
        if np.any(sizes < 1):
            raise ConfigError("node counts must be >= 1")
        guide = self.guidance(guidance)
        out: list[MolecularGraph | None] = [None] * count
        for n in sorted(set(sizes.tolist())):
            positions = np.flatnonzero(sizes == n).tolist()
            for start in range(0, len(positions), self.batch_size):
                chunk = positions[start:start + self.batch_size]
                graphs = sample_batch(self.denoiser, n, len(chunk), self.model, rng, guide)
                for pos, g in zip(chunk, graphs):
                    out[pos] = g.to_molecule()
            log.info("Sampled %d molecules with %d atoms", len(positions), n)
        return out


def load_engine(
    denoiser_path: str,
    classifier_path: str | None = None,
    batch_size: int = BATCH_SIZE,
) -> GenerationEngine:
    """Load a denoiser checkpoint and, optionally, a matching classifier.

    Raises:
        CheckpointError: unreadable files, wrong kinds, or a classifier
            trained on a different diffusion process.
    """
    ckpt = load_checkpoint(denoiser_path)
    if ckpt.kind != "denoiser":
        raise CheckpointError(f"{denoiser_path} is a {ckpt.kind} checkpoint, expected denoiser")
    engine = GenerationEngine(
        denoiser=network_from_checkpoint(ckpt),
        model=transitions_from_checkpoint(ckpt),
        node_histogram=np.asarray(ckpt.node_histogram, dtype=np.int64),
        batch_size=batch_size,
        metadata=ckpt.metadata,
    )
    if classifier_path:
        cls_ckpt = load_checkpoint(classifier_path)
        if cls_ckpt.kind != "classifier":
            raise CheckpointError(f"{classifier_path} is a {cls_ckpt.kind} checkpoint, expected classifier")
        if not _same_process(ckpt, cls_ckpt):
            raise CheckpointError("classifier and denoiser were trained on different diffusion processes")
        engine.classifier = network_from_checkpoint(cls_ckpt)
        engine.classifier_loss = cls_ckpt.metadata.get("loss", "bce")
    log.info(
        "Loaded denoiser (T=%d)%s", engine.model.T,
        " with classifier" if engine.classifier is not None else "",
    )
    return engine
