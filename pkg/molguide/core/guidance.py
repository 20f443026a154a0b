"""Noisy-graph activity classifier and classifier-guided reweighting.

The classifier is the denoiser's graph transformer read through its scalar
graph head, trained on noised molecules. At sampling time its input
gradient ∇_G log q(y_c | G^t) tilts every per-element reverse distribution:
because the guidance exponent is linear in the one-hot entries, the tilt
factorizes into p'(s) ∝ p(s)·exp(sign·λ·grad[s]) per node and edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from scipy.stats import mannwhitneyu

from molguide.chem.graph import MolecularGraph
from molguide.core.denoiser import GraphInputs, GraphTransformer, build_inputs, make_optimizer
from molguide.core.diffusion import OneHotGraph, TransitionModel, noise_graph
from molguide.core.monitor import TrainingMonitor
from molguide.core.training import TORCH_DTYPES, group_by_size, new_network
from molguide.utils.config import (
    ADAM_BETAS,
    ADAM_EPS,
    AUC_STEPS,
    BALANCE_TOLERANCE,
    GUIDANCE_SIGN,
    LAMBDA_GUIDANCE,
    RunConfig,
)
from molguide.utils.errors import ConfigError, DatasetError, TrainingDivergedError
from molguide.utils.logger import get_logger

log = get_logger(__name__)

ClassifierLoss = Callable[[torch.Tensor, torch.Tensor], torch.Tensor]


# ─── Data Model ────────────────────────────────────────────────────


@dataclass(frozen=True)
class LabeledMolecule:
    graph: MolecularGraph
    label: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise DatasetError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class GuidanceConfig:
    """Guidance strength, exponent sign and the label being steered toward."""
    lambda_guidance: float = LAMBDA_GUIDANCE
    sign: int = GUIDANCE_SIGN
    target_label: int = 1

    def __post_init__(self) -> None:
        if self.lambda_guidance < 0:
            raise ConfigError("lambda_guidance must be >= 0")
        if self.sign not in (1, -1):
            raise ConfigError("guidance sign must be +1 or -1")
        if self.target_label not in (0, 1):
            raise ConfigError("target label must be 0 or 1")

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> "GuidanceConfig":
        return cls(cfg.lambda_guidance, cfg.guidance_sign, cfg.target_label)


@dataclass
class ClassifierResult:
    net: GraphTransformer
    loss_name: str
    losses: list[float] = field(default_factory=list)
    evaluation: dict[int, dict[str, float]] = field(default_factory=dict)

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


# ─── Dataset preparation ───────────────────────────────────────────


def split_dataset(items: Sequence, held_out_fraction: float, rng: np.random.Generator) -> tuple[list, list]:
    """Shuffle and split into (train, held_out); held-out size rounds down."""
    order = rng.permutation(len(items))
    n_held = int(len(items) * held_out_fraction)
    held = [items[i] for i in order[:n_held]]
    train = [items[i] for i in order[n_held:]]
    return train, held


def upsample_balance(
    dataset: Sequence[LabeledMolecule],
    rng: np.random.Generator,
    tolerance: float = BALANCE_TOLERANCE,
) -> list[LabeledMolecule]:
    """Replicate the minority class until both classes are roughly the same size.

    The minority is copied whole as often as fits, then the remainder is
    drawn without replacement; already balanced input (within the tolerance)
    is only shuffled.

    Raises:
        DatasetError: only one class present.
    """
    pos = [m for m in dataset if m.label == 1]
    neg = [m for m in dataset if m.label == 0]
    if not pos or not neg:
        raise DatasetError("upsampling needs at least one positive and one negative example")
    minority, majority = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
    if len(minority) >= (1.0 - tolerance) * len(majority):
        balanced = list(dataset)
    else:
        copies, remainder = divmod(len(majority), len(minority))
        extra = rng.choice(len(minority), size=remainder, replace=False)
        upsampled = minority * copies + [minority[i] for i in sorted(extra.tolist())]
        balanced = upsampled + majority
        log.info(
            "Upsampled minority class: %d -> %d (majority %d)",
            len(minority), len(upsampled), len(majority),
        )
    order = rng.permutation(len(balanced))
    return [balanced[i] for i in order]


# ─── Losses ────────────────────────────────────────────────────────


def bce_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """−(y log y_θ + (1−y) log(1−y_θ)) per graph, y_θ = sigmoid(logit)."""
    return F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype), reduction="none")


def mse_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """(y_θ − y)² per graph."""
    return (torch.sigmoid(logits) - labels.to(logits.dtype)) ** 2


CLASSIFIER_LOSSES: dict[str, ClassifierLoss] = {"bce": bce_loss, "mse": mse_loss}


def classifier_loss_fn(name: str) -> ClassifierLoss:
    """The classifier objective; ``mse`` is the ablation variant."""
    try:
        return CLASSIFIER_LOSSES[name]
    except KeyError:
        raise ConfigError(f"unknown classifier loss {name!r} (expected bce or mse)") from None


# ─── Training and evaluation ───────────────────────────────────────


def _noised_inputs(
    graphs: Sequence[OneHotGraph],
    steps: Sequence[int],
    model: TransitionModel,
    rng: np.random.Generator,
    dtype: torch.dtype,
) -> GraphInputs:
    noisy = [noise_graph(g, t, model, rng) for g, t in zip(graphs, steps)]
    return build_inputs(
        np.stack([g.nodes for g in noisy]), np.stack([g.edges for g in noisy]), list(steps), model.T, dtype
    )


def train_classifier(
    dataset: Sequence[LabeledMolecule],
    config: RunConfig,
    model: TransitionModel,
    seed: int | None = None,
    loss_name: str | None = None,
    monitor: TrainingMonitor | None = None,
) -> ClassifierResult:
    """Fit g_θ to predict the label from noised molecules.

    A held-out fraction is split off first; the rest is balanced by
    upsampling and used for training. The held-out set is scored at the
    noise steps in AUC_STEPS (clipped to T).

    Raises:
        DatasetError: empty or single-class data.
        TrainingDivergedError: the loss became non-finite.
    """
    if not dataset:
        raise DatasetError("cannot train a classifier on an empty dataset")
    seed = config.seed if seed is None else seed
    loss_name = loss_name or config.classifier_loss
    loss_fn = classifier_loss_fn(loss_name)
    rng = np.random.default_rng(seed)
    dtype = TORCH_DTYPES[config.dtype]

    train, held = split_dataset(list(dataset), config.held_out_fraction, rng)
    train = upsample_balance(train, rng)
    net = new_network(config, model, seed)
    optimizer = make_optimizer(net.parameters(), config.learning_rate, ADAM_BETAS, ADAM_EPS)
    monitor = monitor or TrainingMonitor(name=f"classifier-{loss_name}")

    graphs = [OneHotGraph.from_molecule(m.graph, model.space) for m in train]
    labels = np.array([m.label for m in train])
    sizes = [g.n for g in graphs]
    result = ClassifierResult(net, loss_name)
    log.info(
        "Training %s classifier: %d train (balanced), %d held out, %d steps",
        loss_name, len(train), len(held), config.train_steps,
    )

    net.train()
    for step in range(1, config.train_steps + 1):
        picks = rng.integers(0, len(graphs), size=min(config.batch_size, len(graphs))).tolist()
        optimizer.zero_grad()
        total = None
        for group in group_by_size(picks, sizes):
            steps = rng.integers(1, model.T + 1, size=len(group)).tolist()
            out = net(_noised_inputs([graphs[i] for i in group], steps, model, rng, dtype))
            loss = loss_fn(out.graph_logit, torch.as_tensor(labels[group])).sum()
            total = loss if total is None else total + loss
        total = total / len(picks)
        value = float(total.detach())
        if not np.isfinite(value):
            raise TrainingDivergedError(f"non-finite classifier loss at step {step}: {value}")
        total.backward()
        optimizer.step()
        result.losses.append(value)
        monitor.record(step, value)
        if step % config.log_every == 0:
            monitor.log_progress(log)

    net.eval()
    if held:
        steps = sorted({min(t, model.T) for t in AUC_STEPS})
        result.evaluation = evaluate_classifier(net, held, model, steps, rng)
    return result


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Area under the ROC curve from the Mann-Whitney U statistic (nan if one class)."""
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        return float("nan")
    u = mannwhitneyu(pos, neg, alternative="two-sided").statistic
    return float(u) / (len(pos) * len(neg))


@torch.no_grad()
def classifier_scores(
    net: GraphTransformer,
    dataset: Sequence[LabeledMolecule],
    model: TransitionModel,
    t: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Predicted probabilities y_θ on copies of ``dataset`` noised to step t."""
    dtype = next(net.parameters()).dtype
    graphs = [OneHotGraph.from_molecule(m.graph, model.space) for m in dataset]
    scores = np.zeros(len(graphs))
    for group in group_by_size(range(len(graphs)), [g.n for g in graphs]):
        out = net(_noised_inputs([graphs[i] for i in group], [t] * len(group), model, rng, dtype))
        scores[group] = torch.sigmoid(out.graph_logit).double().numpy()
    return scores


def evaluate_classifier(
    net: GraphTransformer,
    dataset: Sequence[LabeledMolecule],
    model: TransitionModel,
    steps: Sequence[int],
    rng: np.random.Generator,
) -> dict[int, dict[str, float]]:
    """Held-out ROC-AUC and accuracy (threshold 0.5) at each noise step."""
    labels = np.array([m.label for m in dataset])
    report = {}
    for t in steps:
        scores = classifier_scores(net, dataset, model, t, rng)
        report[int(t)] = {
            "auc": roc_auc(scores, labels),
            "accuracy": float(np.mean((scores > 0.5) == (labels == 1))),
        }
        log.info("Held-out t=%d: AUC %.3f, accuracy %.3f", t, report[t]["auc"], report[t]["accuracy"])
    return report


# ─── Gradients and reweighting ─────────────────────────────────────


def classifier_log_grad(
    net: GraphTransformer,
    nodes: np.ndarray,
    edges: np.ndarray,
    t: int,
    T: int,
    target_label: int,
    loss_name: str = "bce",
) -> tuple[np.ndarray, np.ndarray]:
    """−∇_G loss(y_θ(G^t), y_c) with respect to the relaxed one-hot inputs.

    Args:
        nodes: (B, n, Ka) node states.
        edges: (B, n, n, Ke) edge states.

    Returns:
        (B, n, Ka) node gradient and (B, n, n, Ke) edge gradient; the edge
        block is symmetrized and its diagonal zeroed.
    """
    loss_fn = classifier_loss_fn(loss_name)
    dtype = next(net.parameters()).dtype
    net.eval()
    with torch.enable_grad():
        inputs = build_inputs(nodes, edges, t, T, dtype)
        inputs.nodes.requires_grad_(True)
        inputs.edges.requires_grad_(True)
        logits = net(inputs).graph_logit
        labels = torch.full_like(logits, float(target_label))
        loss = loss_fn(logits, labels).sum()
        grad_x, grad_e = torch.autograd.grad(loss, [inputs.nodes, inputs.edges])
    grad_x = -grad_x.double().numpy()
    grad_e = -grad_e.double().numpy()
    grad_e = 0.5 * (grad_e + grad_e.transpose(0, 2, 1, 3))
    n = grad_e.shape[1]
    grad_e[:, np.arange(n), np.arange(n), :] = 0.0
    return grad_x, grad_e


def guided_reweight(base: np.ndarray, grad: np.ndarray, cfg: GuidanceConfig) -> np.ndarray:
    """p'(s) ∝ p(s)·exp(sign·λ·grad[s]) per element (last axis), max-stabilized.

    λ = 0 returns the base distributions unchanged.
    """
    base = np.asarray(base, dtype=np.float64)
    if cfg.lambda_guidance == 0:
        return base.copy()
    exponent = cfg.sign * cfg.lambda_guidance * np.asarray(grad, dtype=np.float64)
    exponent = exponent - exponent.max(axis=-1, keepdims=True)
    weighted = base * np.exp(exponent)
    total = weighted.sum(axis=-1, keepdims=True)
    return np.where(total > 0, weighted / np.where(total > 0, total, 1.0), base)


class ClassifierGuidance:
    """Reweights reverse-step distributions with a frozen classifier's gradient."""

    def __init__(self, net: GraphTransformer, cfg: GuidanceConfig, T: int, loss_name: str = "bce"):
        self.net = net
        self.cfg = cfg
        self.T = T
        self.loss_name = loss_name

    def reweight(
        self,
        nodes: np.ndarray,
        edges: np.ndarray,
        t: int,
        node_dist: np.ndarray,
        edge_dist: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Tilt (B, n, Ka) node and (B, n_pairs, Ke) upper-triangle edge distributions."""
        if self.cfg.lambda_guidance == 0:
            return node_dist, edge_dist
        grad_x, grad_e = classifier_log_grad(
            self.net, nodes, edges, t, self.T, self.cfg.target_label, self.loss_name
        )
        iu = np.triu_indices(nodes.shape[1], k=1)
        return (
            guided_reweight(node_dist, grad_x, self.cfg),
            guided_reweight(edge_dist, grad_e[:, iu[0], iu[1]], self.cfg),
        )
