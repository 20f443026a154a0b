"""Discrete diffusion over one-hot node and edge states.

Forward noising uses marginal transition matrices
``Q^t = α^t I + (1 - α^t) 1 mᵀ`` under a cosine cumulative schedule, and the
reverse step is the exact posterior ``q(x^{t-1} | x^t, x^0)`` mixed over the
denoiser's prediction of ``x^0``.

All arrays are numpy float64. Distribution helpers operate on the last axis,
so they accept a single element ``(K,)`` or any batch ``(..., K)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from molguide.chem.elements import N_ATOM_CLASSES, N_BOND_CLASSES, BondClass, Element
from molguide.chem.graph import MolecularGraph
from molguide.utils.config import COSINE_OFFSET
from molguide.utils.errors import DatasetError, NumericError
from molguide.utils.logger import get_logger

log = get_logger(__name__)

STOCHASTIC_TOL = 1e-9
PRED_NORM_TOL = 1e-6


# ─── State space and schedule ──────────────────────────────────────


@dataclass(frozen=True)
class StateSpace:
    """Class counts of the node and edge one-hot encodings."""
    atom_classes: int = N_ATOM_CLASSES
    edge_classes: int = N_BOND_CLASSES

    def __post_init__(self) -> None:
        if self.atom_classes < 1 or self.edge_classes < 2:
            raise ValueError("need >= 1 atom class and >= 2 edge classes")

    def to_dict(self) -> dict:
        return {"atom_classes": self.atom_classes, "edge_classes": self.edge_classes}


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """Per-step retention α^t and cumulative ᾱ^t, indexed 0..T (α^0 = ᾱ^0 = 1)."""
    alpha: np.ndarray
    alpha_bar: np.ndarray
    s: float = COSINE_OFFSET

    @property
    def T(self) -> int:
        return len(self.alpha) - 1

    @classmethod
    def cosine(cls, T: int, s: float = COSINE_OFFSET) -> "NoiseSchedule":
        """ᾱ^t = f(t)/f(0) with f(t) = cos²((t/T + s)/(1 + s) · π/2)."""
        if T < 1:
            raise ValueError(f"T must be >= 1, got {T}")
        steps = np.arange(T + 1, dtype=np.float64)
        f = np.cos((steps / T + s) / (1.0 + s) * math.pi / 2.0) ** 2
        alpha_bar = np.clip(f / f[0], 0.0, 1.0)
        alpha_bar[0] = 1.0
        alpha = np.ones(T + 1)
        alpha[1:] = np.clip(alpha_bar[1:] / alpha_bar[:-1], 0.0, 1.0)
        return cls(alpha, alpha_bar, s)

    @classmethod
    def from_alphas(cls, alphas: Sequence[float]) -> "NoiseSchedule":
        """Explicit α^1..α^T (each in [0, 1])."""
        a = np.asarray(alphas, dtype=np.float64)
        if a.ndim != 1 or len(a) < 1 or np.any(a < 0) or np.any(a > 1):
            raise ValueError("alphas must be a non-empty sequence in [0, 1]")
        alpha = np.concatenate([[1.0], a])
        return cls(alpha, np.cumprod(alpha), float("nan"))

    def to_dict(self) -> dict:
        if math.isnan(self.s):
            return {"T": self.T, "alphas": self.alpha[1:].tolist()}
        return {"T": self.T, "s": self.s}

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSchedule":
        if "alphas" in data:
            return cls.from_alphas(data["alphas"])
        return cls.cosine(int(data["T"]), float(data.get("s", COSINE_OFFSET)))


# ─── Transitions ───────────────────────────────────────────────────


def _check_marginal(m: np.ndarray, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 1 or np.any(m < 0) or abs(m.sum() - 1.0) > STOCHASTIC_TOL:
        raise NumericError(f"{name} marginal is not a probability vector: {m.tolist()}")
    return m


def transition_matrix(alpha: float, marginal: np.ndarray) -> np.ndarray:
    k = len(marginal)
    return alpha * np.eye(k) + (1.0 - alpha) * np.outer(np.ones(k), marginal)


@dataclass(frozen=True, eq=False)
class ClassTransitions:
    """Q^t and Q̄^t of one class family (nodes or edges), stacked over t = 0..T."""
    marginal: np.ndarray
    q: np.ndarray       # (T+1, K, K), q[0] = I
    q_bar: np.ndarray   # (T+1, K, K), q_bar[0] = I

    @classmethod
    def build(cls, schedule: NoiseSchedule, marginal: np.ndarray) -> "ClassTransitions":
        marginal = _check_marginal(marginal, "class")
        k = len(marginal)
        q = np.stack([transition_matrix(a, marginal) for a in schedule.alpha])
        q[0] = np.eye(k)
        q_bar = np.empty_like(q)
        q_bar[0] = np.eye(k)
        for t in range(1, len(q)):
            q_bar[t] = q_bar[t - 1] @ q[t]
        return cls(marginal, q, q_bar)

    @property
    def k(self) -> int:
        return len(self.marginal)

    @property
    def T(self) -> int:
        return self.q.shape[0] - 1

    def posterior_term(self, x_t: np.ndarray, x0: np.ndarray, t: int) -> np.ndarray:
        """normalize(x^t (Q^t)ᵀ ⊙ x^0 Q̄^{t-1}), the Bayes posterior over x^{t-1}.

        Raises:
            NumericError: zero normalizer (x^t unreachable from x^0).
        """
        self._check_step(t, low=1)
        unnorm = (x_t @ self.q[t].T) * (x0 @ self.q_bar[t - 1])
        z = unnorm.sum(axis=-1, keepdims=True)
        if np.any(z <= 0):
            raise NumericError(f"posterior normalizer is zero at t={t}")
        return unnorm / z

    def denoising_distribution(self, pred: np.ndarray, x_t: np.ndarray, t: int) -> np.ndarray:
        """Σ_x q(x^{t-1} | x^0 = x, x^t) · pred(x), over every hypothesis x.

        At t = 1 the prediction itself is the distribution of x^0. Hypotheses
        that cannot produce x^t (zero normalizer) are skipped.

        Raises:
            NumericError: pred is not normalized within 1e-6.
        """
        self._check_step(t, low=1)
        pred = np.asarray(pred, dtype=np.float64)
        if np.any(pred < 0) or np.any(np.abs(pred.sum(axis=-1) - 1.0) > PRED_NORM_TOL):
            raise NumericError("denoiser prediction is not a probability vector")
        if t == 1:
            return pred.copy()
        left = x_t @ self.q[t].T                                   # (..., K)
        unnorm = left[..., None, :] * self.q_bar[t - 1]            # (..., K0, K)
        z = unnorm.sum(axis=-1, keepdims=True)
        posterior = np.divide(unnorm, z, out=np.zeros_like(unnorm), where=z > 0)
        mixed = np.einsum("...c,...ck->...k", pred, posterior)
        total = mixed.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            fallback = left / left.sum(axis=-1, keepdims=True)
        return np.where(total > 0, mixed / np.where(total > 0, total, 1.0), fallback)

    def _check_step(self, t: int, low: int) -> None:
        if not low <= t <= self.T:
            raise ValueError(f"step t={t} outside [{low}, {self.T}]")


@dataclass(frozen=True, eq=False)
class Marginals:
    nodes: np.ndarray
    edges: np.ndarray

    def to_dict(self) -> dict:
        return {"nodes": self.nodes.tolist(), "edges": self.edges.tolist()}


@dataclass(frozen=True, eq=False)
class TransitionModel:
    """Schedule plus node and edge transitions; immutable and shareable."""
    space: StateSpace
    schedule: NoiseSchedule
    nodes: ClassTransitions
    edges: ClassTransitions

    @property
    def T(self) -> int:
        return self.schedule.T

    @property
    def marginals(self) -> Marginals:
        return Marginals(self.nodes.marginal, self.edges.marginal)


def build_transitions(
    schedule: NoiseSchedule, marginals: Marginals, space: StateSpace | None = None
) -> TransitionModel:
    """Marginal transition matrices for both class families.

    Raises:
        NumericError: a marginal is not a probability vector.
    """
    space = space or StateSpace(len(marginals.nodes), len(marginals.edges))
    if len(marginals.nodes) != space.atom_classes or len(marginals.edges) != space.edge_classes:
        raise NumericError("marginal lengths do not match the state space")
    return TransitionModel(
        space=space,
        schedule=schedule,
        nodes=ClassTransitions.build(schedule, marginals.nodes),
        edges=ClassTransitions.build(schedule, marginals.edges),
    )


def posterior_term(family: ClassTransitions, x_t: np.ndarray, x0: np.ndarray, t: int) -> np.ndarray:
    return family.posterior_term(x_t, x0, t)


def denoising_distribution(
    family: ClassTransitions, pred: np.ndarray, x_t: np.ndarray, t: int
) -> np.ndarray:
    return family.denoising_distribution(pred, x_t, t)


# ─── One-hot graphs ────────────────────────────────────────────────


def one_hot(indices: np.ndarray, k: int) -> np.ndarray:
    return np.eye(k, dtype=np.float64)[np.asarray(indices, dtype=np.int64)]


@dataclass(frozen=True, eq=False)
class OneHotGraph:
    """Node states (n, Ka), symmetric edge states (n, n, Ke), step index t."""
    nodes: np.ndarray
    edges: np.ndarray
    t: int = 0

    @classmethod
    def from_classes(
        cls, node_classes: np.ndarray, edge_classes: np.ndarray, space: StateSpace, t: int = 0
    ) -> "OneHotGraph":
        edge_classes = np.array(edge_classes, dtype=np.int64)
        np.fill_diagonal(edge_classes, 0)
        return cls(one_hot(node_classes, space.atom_classes), one_hot(edge_classes, space.edge_classes), t)

    @classmethod
    def from_molecule(cls, g: MolecularGraph, space: StateSpace | None = None) -> "OneHotGraph":
        space = space or StateSpace()
        return cls.from_classes(np.array([a.index for a in g.atoms]), g.bonds, space, 0)

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def node_classes(self) -> np.ndarray:
        return self.nodes.argmax(axis=-1)

    @property
    def edge_classes(self) -> np.ndarray:
        return self.edges.argmax(axis=-1)

    @property
    def adjacency(self) -> np.ndarray:
        return self.edge_classes != 0

    def to_molecule(self) -> MolecularGraph:
        """Decode to a MolecularGraph; "none" edges are dropped, validity unchecked."""
        atoms = tuple(Element.from_index(int(c)) for c in self.node_classes)
        return MolecularGraph(atoms, self.edge_classes.astype(np.int8))


def upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(n, k=1)


def symmetric_from_upper(values: np.ndarray, n: int, fill: int = 0) -> np.ndarray:
    """(n, n) integer matrix with ``values`` on the upper triangle, mirrored."""
    out = np.full((n, n), fill, dtype=np.int64)
    iu = upper_pairs(n)
    out[iu] = values
    out.T[iu] = values
    return out


# ─── Sampling primitives ───────────────────────────────────────────


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw of one class index per distribution along the last axis."""
    probs = np.asarray(probs, dtype=np.float64)
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1] + (1,)) * cdf[..., -1:]
    idx = np.sum(cdf <= u, axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def estimate_marginals(
    molecules: Iterable[MolecularGraph], n_max: int, space: StateSpace | None = None
) -> Marginals:
    """Empirical atom-class and edge-class frequencies.

    Edge frequencies count every unordered pair of the n_max-node padded
    representation; absent pairs count as "none".

    Raises:
        DatasetError: empty dataset, or a molecule larger than n_max.
    """
    space = space or StateSpace()
    node_counts = np.zeros(space.atom_classes)
    edge_counts = np.zeros(space.edge_classes)
    pairs_per_graph = n_max * (n_max - 1) // 2
    seen = 0
    for g in molecules:
        if g.n > n_max:
            raise DatasetError(f"molecule with {g.n} atoms exceeds n_max={n_max}")
        seen += 1
        for atom in g.atoms:
            node_counts[atom.index] += 1
        upper = g.bonds[upper_pairs(g.n)]
        present = np.bincount(upper.astype(np.int64), minlength=space.edge_classes)
        edge_counts += present
        edge_counts[BondClass.NONE] += pairs_per_graph - len(upper)
    if seen == 0:
        raise DatasetError("cannot estimate marginals from an empty dataset")
    edges = edge_counts / edge_counts.sum() if edge_counts.sum() else np.eye(space.edge_classes)[0]
    log.debug("Marginals from %d molecules (n_max=%d)", seen, n_max)
    return Marginals(node_counts / node_counts.sum(), edges)


def noise_graph(
    g0: OneHotGraph, t: int, model: TransitionModel, rng: np.random.Generator
) -> OneHotGraph:
    """Draw G^t ~ q(G^t | G^0): rows of Q̄^t, upper triangle only, mirrored."""
    if not 1 <= t <= model.T:
        raise ValueError(f"step t={t} outside [1, {model.T}]")
    n = g0.n
    node_idx = sample_categorical(g0.nodes @ model.nodes.q_bar[t], rng)
    iu = upper_pairs(n)
    edge_idx = sample_categorical(g0.edges[iu] @ model.edges.q_bar[t], rng)
    return OneHotGraph.from_classes(node_idx, symmetric_from_upper(edge_idx, n), model.space, t)


def sample_prior(n: int, model: TransitionModel, rng: np.random.Generator) -> OneHotGraph:
    """G^T with iid node states from m_A and upper-triangle edge states from m_B."""
    if n < 1:
        raise ValueError(f"node count must be >= 1, got {n}")
    node_idx = sample_categorical(np.broadcast_to(model.nodes.marginal, (n, model.nodes.k)), rng)
    n_pairs = n * (n - 1) // 2
    edge_idx = sample_categorical(np.broadcast_to(model.edges.marginal, (n_pairs, model.edges.k)), rng)
    return OneHotGraph.from_classes(node_idx, symmetric_from_upper(edge_idx, n), model.space, model.T)


def node_count_histogram(molecules: Iterable[MolecularGraph], n_max: int) -> np.ndarray:
    """Counts of heavy-atom sizes 0..n_max."""
    hist = np.zeros(n_max + 1, dtype=np.int64)
    for g in molecules:
        if g.n <= n_max:
            hist[g.n] += 1
    return hist


def sample_node_counts(histogram: np.ndarray, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` node counts from a size histogram."""
    hist = np.asarray(histogram, dtype=np.float64)
    if hist.sum() <= 0:
        raise DatasetError("node-count histogram is empty")
    return rng.choice(len(hist), size=count, p=hist / hist.sum())
