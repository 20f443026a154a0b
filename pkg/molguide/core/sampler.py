"""Reverse diffusion chain: G^T from the marginals down to a decoded molecule."""

from __future__ import annotations

from typing import Protocol

import numpy as np

from molguide.chem.graph import MolecularGraph
from molguide.core.diffusion import (
    OneHotGraph,
    TransitionModel,
    one_hot,
    sample_categorical,
    sample_prior,
    upper_pairs,
)
from molguide.core.guidance import ClassifierGuidance


class Denoiser(Protocol):
    def predict(self, nodes: np.ndarray, edges: np.ndarray, t: int, T: int) -> tuple[np.ndarray, np.ndarray]:
        """p(x^0 | G^t) for a (B, n, ...) batch: (B, n, Ka) and (B, n, n, Ke)."""


def reverse_step(
    denoiser: Denoiser,
    nodes: np.ndarray,
    edges: np.ndarray,
    t: int,
    model: TransitionModel,
    rng: np.random.Generator,
    guidance: ClassifierGuidance | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample G^{t-1} for a batch of graphs at step t; returns one-hot arrays."""
    batch, n, _ = nodes.shape
    iu = upper_pairs(n)
    node_pred, edge_pred = denoiser.predict(nodes, edges, t, model.T)
    edge_pred = edge_pred[:, iu[0], iu[1]]
    edge_now = edges[:, iu[0], iu[1]]

    node_dist = model.nodes.denoising_distribution(node_pred, nodes, t)
    edge_dist = model.edges.denoising_distribution(edge_pred, edge_now, t)
    if guidance is not None:
        node_dist, edge_dist = guidance.reweight(nodes, edges, t, node_dist, edge_dist)

    node_idx = sample_categorical(node_dist, rng)
    edge_upper = sample_categorical(edge_dist, rng)
    edge_idx = np.zeros((batch, n, n), dtype=np.int64)
    edge_idx[:, iu[0], iu[1]] = edge_upper
    edge_idx[:, iu[1], iu[0]] = edge_upper
    return one_hot(node_idx, model.space.atom_classes), one_hot(edge_idx, model.space.edge_classes)


def sample_batch(
    denoiser: Denoiser,
    n: int,
    count: int,
    model: TransitionModel,
    rng: np.random.Generator,
    guidance: ClassifierGuidance | None = None,
) -> list[OneHotGraph]:
    """Run ``count`` chains of n-node graphs from t = T to 0 together."""
    priors = [sample_prior(n, model, rng) for _ in range(count)]
    nodes = np.stack([g.nodes for g in priors])
    edges = np.stack([g.edges for g in priors])
    for t in range(model.T, 0, -1):
        nodes, edges = reverse_step(denoiser, nodes, edges, t, model, rng, guidance)
    return [OneHotGraph(nodes[b], edges[b], 0) for b in range(count)]


def sample_unconditional(
    denoiser: Denoiser, n: int, model: TransitionModel, rng: np.random.Generator
) -> MolecularGraph:
    """One molecule from the unguided chain; validity is not guaranteed."""
    return sample_batch(denoiser, n, 1, model, rng)[0].to_molecule()


def sample_guided(
    denoiser: Denoiser,
    guidance: ClassifierGuidance,
    n: int,
    model: TransitionModel,
    rng: np.random.Generator,
) -> MolecularGraph:
    """One molecule from the classifier-guided chain."""
    return sample_batch(denoiser, n, 1, model, rng, guidance)[0].to_molecule()
