"""Denoiser training loop: noise a minibatch, predict G^0, minimize the weighted CE."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from molguide.chem.graph import MolecularGraph
from molguide.core.denoiser import (
    GraphTransformer,
    GraphTransformerConfig,
    build_inputs,
    diffusion_loss,
    make_optimizer,
)
from molguide.core.diffusion import OneHotGraph, TransitionModel, noise_graph
from molguide.core.monitor import TrainingMonitor
from molguide.utils.config import ADAM_BETAS, ADAM_EPS, RunConfig
from molguide.utils.errors import DatasetError, TrainingDivergedError
from molguide.utils.logger import get_logger

log = get_logger(__name__)

TORCH_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass
class TrainingResult:
    net: GraphTransformer
    losses: list[float] = field(default_factory=list)
    steps: int = 0

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def group_by_size(indices: Sequence[int], sizes: Sequence[int]) -> list[list[int]]:
    """Split a minibatch into runs of equal node count (ascending n, stable order)."""
    groups: dict[int, list[int]] = defaultdict(list)
    for i in indices:
        groups[sizes[i]].append(i)
    return [groups[n] for n in sorted(groups)]


def noisy_batch(
    graphs: Sequence[OneHotGraph],
    model: TransitionModel,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray, list[int]]:
    """Draw t ~ U{1..T} per graph and noise it; returns stacked one-hots and steps."""
    steps = rng.integers(1, model.T + 1, size=len(graphs)).tolist()
    noisy = [noise_graph(g, t, model, rng) for g, t in zip(graphs, steps)]
    return np.stack([g.nodes for g in noisy]), np.stack([g.edges for g in noisy]), steps


def new_network(config: RunConfig, model: TransitionModel, seed: int) -> GraphTransformer:
    torch.manual_seed(seed)
    net_config = GraphTransformerConfig.from_model_config(config.model, model.space)
    return GraphTransformer(net_config).to(TORCH_DTYPES[config.dtype])


def train_diffusion(
    molecules: Sequence[MolecularGraph],
    config: RunConfig,
    model: TransitionModel,
    seed: int | None = None,
    monitor: TrainingMonitor | None = None,
    on_checkpoint: Callable[[TrainingResult], None] | None = None,
) -> TrainingResult:
    """Fit the denoiser f_θ(G^t, t) to predict G^0.

    Per step: draw a minibatch, draw t per item, noise, compute aux
    features, forward, weighted cross-entropy, backward, Adam update.

    Raises:
        DatasetError: empty dataset.
        TrainingDivergedError: the loss became non-finite.
    """
    if not molecules:
        raise DatasetError("cannot train on an empty dataset")
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    dtype = TORCH_DTYPES[config.dtype]
    net = new_network(config, model, seed)
    optimizer = make_optimizer(net.parameters(), config.learning_rate, ADAM_BETAS, ADAM_EPS)
    monitor = monitor or TrainingMonitor(name="diffusion")

    graphs = [OneHotGraph.from_molecule(g, model.space) for g in molecules]
    sizes = [g.n for g in graphs]
    result = TrainingResult(net)
    log.info(
        "Training denoiser: %d molecules, %d steps, %d parameters",
        len(graphs), config.train_steps, net.n_parameters(),
    )

    net.train()
    for step in range(1, config.train_steps + 1):
        picks = rng.integers(0, len(graphs), size=min(config.batch_size, len(graphs))).tolist()
        optimizer.zero_grad()
        total = None
        for group in group_by_size(picks, sizes):
            clean = [graphs[i] for i in group]
            nodes, edges, steps = noisy_batch(clean, model, rng)
            out = net(build_inputs(nodes, edges, steps, model.T, dtype))
            loss = diffusion_loss(
                out,
                torch.as_tensor(np.stack([g.node_classes for g in clean])),
                torch.as_tensor(np.stack([g.edge_classes for g in clean])),
                config.lambda_edge,
            ) * len(group)
            total = loss if total is None else total + loss
        total = total / len(picks)
        value = float(total.detach())
        if not np.isfinite(value):
            raise TrainingDivergedError(f"non-finite diffusion loss at step {step}: {value}")
        total.backward()
        optimizer.step()

        result.losses.append(value)
        result.steps = step
        monitor.record(step, value)
        if step % config.log_every == 0:
            monitor.log_progress(log)
        if on_checkpoint and config.checkpoint_every and step % config.checkpoint_every == 0:
            on_checkpoint(result)

    net.eval()
    log.info("Denoiser training finished: final loss %.4f", result.final_loss)
    return result
