"""Graph transformer shared by the denoiser and the noisy-graph classifier.

Each layer runs node self-attention whose scores are FiLM-modulated by the
edge embeddings; the attention products become the new edge features, and
a global vector (time, spectrum, cycle totals) FiLM-modulates node and edge
channels. Inputs are dense batches of equal-size graphs, so no masking is
needed and the network is permutation-equivariant by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from molguide.chem.features import GLOBAL_FEATURE_DIM, NODE_FEATURE_DIM, cycle_spectral_features
from molguide.core.diffusion import StateSpace
from molguide.utils.config import DIAGONAL_NONE_LOGIT, ModelConfig
from molguide.utils.errors import ConfigError, NumericError


@dataclass(frozen=True)
class GraphTransformerConfig:
    n_layers: int
    hidden_node: int
    hidden_edge: int
    hidden_global: int
    n_heads: int
    atom_classes: int
    edge_classes: int
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.hidden_node % self.n_heads:
            raise ConfigError("hidden_node must be divisible by n_heads")

    @classmethod
    def from_model_config(cls, cfg: ModelConfig, space: StateSpace) -> "GraphTransformerConfig":
        return cls(
            n_layers=cfg.n_layers,
            hidden_node=cfg.hidden_node,
            hidden_edge=cfg.hidden_edge,
            hidden_global=cfg.hidden_global,
            n_heads=cfg.n_heads,
            atom_classes=space.atom_classes,
            edge_classes=space.edge_classes,
            dropout=cfg.dropout,
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DenoiserOutput:
    """Node logits (B, n, Ka), symmetric edge logits (B, n, n, Ke), graph logit (B,)."""
    node_logits: torch.Tensor
    edge_logits: torch.Tensor
    graph_logit: torch.Tensor | None = None


@dataclass
class GraphInputs:
    """Dense network inputs for a batch of same-size graphs."""
    nodes: torch.Tensor      # (B, n, Ka) one-hot (may require grad)
    edges: torch.Tensor      # (B, n, n, Ke)
    aux_nodes: torch.Tensor  # (B, n, NODE_FEATURE_DIM)
    aux_global: torch.Tensor  # (B, GLOBAL_FEATURE_DIM)


def build_inputs(
    nodes: np.ndarray,
    edges: np.ndarray,
    t: int | Sequence[int],
    T: int,
    dtype: torch.dtype = torch.float32,
) -> GraphInputs:
    """Tensors for a batch of one-hot graphs, aux features included.

    ``nodes`` is (B, n, Ka), ``edges`` (B, n, n, Ke); ``t`` is one step for
    the whole batch or one per graph.
    """
    nodes = np.asarray(nodes)
    edges = np.asarray(edges)
    batch = nodes.shape[0]
    steps = [int(t)] * batch if np.isscalar(t) else [int(s) for s in t]
    aux_nodes, aux_global = [], []
    for b in range(batch):
        aux = cycle_spectral_features(edges[b].argmax(axis=-1) != 0, steps[b], T)
        aux_nodes.append(aux.node_matrix())
        aux_global.append(aux.global_vector())
    return GraphInputs(
        nodes=torch.as_tensor(nodes, dtype=dtype),
        edges=torch.as_tensor(edges, dtype=dtype),
        aux_nodes=torch.as_tensor(np.stack(aux_nodes), dtype=dtype),
        aux_global=torch.as_tensor(np.stack(aux_global), dtype=dtype),
    )


# ─── Building blocks ───────────────────────────────────────────────


def _mlp(d_in: int, d_hidden: int, d_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(d_in, d_hidden), nn.SiLU(), nn.Linear(d_hidden, d_out))


class NodesToGlobal(nn.Module):
    """Mean and max pooling over nodes, projected to the global width."""

    def __init__(self, dx: int, dy: int):
        super().__init__()
        self.lin = nn.Linear(2 * dx, dy)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.lin(torch.cat([x.mean(dim=1), x.amax(dim=1)], dim=-1))


class EdgesToGlobal(nn.Module):
    def __init__(self, de: int, dy: int):
        super().__init__()
        self.lin = nn.Linear(2 * de, dy)

    def forward(self, e: torch.Tensor) -> torch.Tensor:
        return self.lin(torch.cat([e.mean(dim=(1, 2)), e.amax(dim=(1, 2))], dim=-1))


class NodeEdgeBlock(nn.Module):
    """Edge-modulated self-attention updating node, edge and global channels."""

    def __init__(self, dx: int, de: int, dy: int, n_heads: int):
        super().__init__()
        self.dx, self.n_heads = dx, n_heads
        self.df = dx // n_heads
        self.q = nn.Linear(dx, dx)
        self.k = nn.Linear(dx, dx)
        self.v = nn.Linear(dx, dx)

        # FiLM of attention scores by edges
        self.e_add = nn.Linear(de, dx)
        self.e_mul = nn.Linear(de, dx)
        # FiLM of edges and nodes by the global vector
        self.y_e_add = nn.Linear(dy, dx)
        self.y_e_mul = nn.Linear(dy, dx)
        self.y_x_add = nn.Linear(dy, dx)
        self.y_x_mul = nn.Linear(dy, dx)

        self.y_y = nn.Linear(dy, dy)
        self.x_y = NodesToGlobal(dx, dy)
        self.e_y = EdgesToGlobal(de, dy)

        self.x_out = nn.Linear(dx, dx)
        self.e_out = nn.Linear(dx, de)
        self.y_out = nn.Sequential(nn.Linear(dy, dy), nn.SiLU(), nn.Linear(dy, dy))

    def forward(self, x, e, y):
        batch, n, _ = x.shape
        shape = (batch, n, self.n_heads, self.df)
        q = self.q(x).reshape(shape).unsqueeze(2)    # (B, n, 1, h, df)
        k = self.k(x).reshape(shape).unsqueeze(1)    # (B, 1, n, h, df)
        v = self.v(x).reshape(shape).unsqueeze(1)

        scores = q * k / math.sqrt(self.df)          # (B, n, n, h, df)
        e1 = self.e_mul(e).reshape(batch, n, n, self.n_heads, self.df)
        e2 = self.e_add(e).reshape(batch, n, n, self.n_heads, self.df)
        scores = scores * (e1 + 1) + e2

        new_e = scores.flatten(start_dim=3)
        ye1 = self.y_e_add(y)[:, None, None, :]
        ye2 = self.y_e_mul(y)[:, None, None, :]
        new_e = self.e_out(ye1 + (ye2 + 1) * new_e)

        attn = torch.softmax(scores, dim=2)
        weighted = (attn * v).sum(dim=2).flatten(start_dim=2)   # (B, n, dx)
        yx1 = self.y_x_add(y)[:, None, :]
        yx2 = self.y_x_mul(y)[:, None, :]
        new_x = self.x_out(yx1 + (yx2 + 1) * weighted)

        new_y = self.y_out(self.y_y(y) + self.x_y(x) + self.e_y(e))
        return new_x, new_e, new_y


class TransformerLayer(nn.Module):
    """Attention block plus residual, layer norm and SiLU feed-forward per channel."""

    def __init__(self, dx: int, de: int, dy: int, n_heads: int, dropout: float):
        super().__init__()
        self.attn = NodeEdgeBlock(dx, de, dy, n_heads)
        self.norm_x1, self.norm_e1, self.norm_y1 = nn.LayerNorm(dx), nn.LayerNorm(de), nn.LayerNorm(dy)
        self.ff_x = _mlp(dx, 2 * dx, dx)
        self.ff_e = _mlp(de, 2 * de, de)
        self.ff_y = _mlp(dy, 2 * dy, dy)
        self.norm_x2, self.norm_e2, self.norm_y2 = nn.LayerNorm(dx), nn.LayerNorm(de), nn.LayerNorm(dy)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, e, y):
        new_x, new_e, new_y = self.attn(x, e, y)
        x = self.norm_x1(x + self.drop(new_x))
        e = self.norm_e1(e + self.drop(new_e))
        y = self.norm_y1(y + self.drop(new_y))
        x = self.norm_x2(x + self.drop(self.ff_x(x)))
        e = self.norm_e2(e + self.drop(self.ff_e(e)))
        y = self.norm_y2(y + self.drop(self.ff_y(y)))
        return x, e, y


# ─── Network ───────────────────────────────────────────────────────


class GraphTransformer(nn.Module):
    """Backbone with a per-element head (denoiser) and a scalar graph head (classifier)."""

    def __init__(self, config: GraphTransformerConfig):
        super().__init__()
        self.config = config
        ka, ke = config.atom_classes, config.edge_classes
        dx, de, dy = config.hidden_node, config.hidden_edge, config.hidden_global
        self.in_x = _mlp(ka + NODE_FEATURE_DIM, dx, dx)
        self.in_e = _mlp(ke, de, de)
        self.in_y = _mlp(GLOBAL_FEATURE_DIM, dy, dy)
        self.layers = nn.ModuleList(
            TransformerLayer(dx, de, dy, config.n_heads, config.dropout)
            for _ in range(config.n_layers)
        )
        self.out_x = _mlp(dx, dx, ka)
        self.out_e = _mlp(de, de, ke)
        self.out_y = _mlp(dy, dy, 1)
        diag = torch.full((ke,), -DIAGONAL_NONE_LOGIT)
        diag[0] = 0.0
        self.register_buffer("diagonal_logits", diag, persistent=False)

    def forward(self, inputs: GraphInputs) -> DenoiserOutput:
        x0, e0 = inputs.nodes, inputs.edges
        batch, n, _ = x0.shape
        e0 = (e0 + e0.transpose(1, 2)) / 2
        x = self.in_x(torch.cat([x0, inputs.aux_nodes], dim=-1))
        e = self.in_e(e0)
        e = (e + e.transpose(1, 2)) / 2
        y = self.in_y(inputs.aux_global)
        for layer in self.layers:
            x, e, y = layer(x, e, y)

        node_logits = self.out_x(x) + x0
        edge_logits = self.out_e(e) + e0
        edge_logits = (edge_logits + edge_logits.transpose(1, 2)) / 2
        eye = torch.eye(n, dtype=torch.bool, device=x0.device)[None, :, :, None]
        edge_logits = torch.where(eye, self.diagonal_logits.to(edge_logits.dtype), edge_logits)
        return DenoiserOutput(node_logits, edge_logits, self.out_y(y).squeeze(-1))

    @torch.no_grad()
    def predict(self, nodes: np.ndarray, edges: np.ndarray, t: int, T: int) -> tuple[np.ndarray, np.ndarray]:
        """Class probabilities p(x^0 | G^t) as float64 arrays.

        Args:
            nodes: (B, n, Ka) one-hot node states.
            edges: (B, n, n, Ke) one-hot edge states.
        """
        self.eval()
        dtype = next(self.parameters()).dtype
        out = self(build_inputs(nodes, edges, t, T, dtype))
        node_p = torch.softmax(out.node_logits.double(), dim=-1).numpy()
        edge_p = torch.softmax(out.edge_logits.double(), dim=-1).numpy()
        return node_p, edge_p

    def n_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())


# ─── Loss and gradients ────────────────────────────────────────────


def diffusion_loss(
    pred: DenoiserOutput,
    target_nodes: torch.Tensor,
    target_edges: torch.Tensor,
    lambda_edge: float,
) -> torch.Tensor:
    """Node cross-entropy + λ · upper-triangle edge cross-entropy, summed per graph, batch mean.

    Targets are class indices (B, n) and (B, n, n), or one-hot tensors.
    """
    if target_nodes.dim() == pred.node_logits.dim():
        target_nodes = target_nodes.argmax(dim=-1)
    if target_edges.dim() == pred.edge_logits.dim():
        target_edges = target_edges.argmax(dim=-1)
    batch, n, ka = pred.node_logits.shape
    node_term = F.cross_entropy(
        pred.node_logits.reshape(-1, ka), target_nodes.reshape(-1).long(), reduction="sum"
    )
    iu = torch.triu_indices(n, n, offset=1)
    edge_logits = pred.edge_logits[:, iu[0], iu[1]]
    edge_target = target_edges[:, iu[0], iu[1]]
    edge_term = F.cross_entropy(
        edge_logits.reshape(-1, edge_logits.shape[-1]), edge_target.reshape(-1).long(), reduction="sum"
    ) if edge_logits.numel() else pred.node_logits.new_zeros(())
    return (node_term + lambda_edge * edge_term) / batch


def backward(loss: torch.Tensor, tensors: Sequence[torch.Tensor]) -> list[torch.Tensor]:
    """Exact gradients of a scalar loss with respect to ``tensors``.

    Tensors that do not influence the loss get a zero gradient.

    Raises:
        NumericError: the loss carries no recorded computation graph.
    """
    if loss.grad_fn is None:
        raise NumericError("loss has no recorded computation graph; run a forward pass first")
    grads = torch.autograd.grad(loss, list(tensors), allow_unused=True)
    return [torch.zeros_like(t) if g is None else g for t, g in zip(tensors, grads)]


def make_optimizer(params, learning_rate: float, betas, eps: float) -> torch.optim.Adam:
    return torch.optim.Adam(params, lr=learning_rate, betas=tuple(betas), eps=eps, weight_decay=0.0)
