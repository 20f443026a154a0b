"""k-means over fingerprints with a generalized Tanimoto distance, plus 1-NN assignment."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from molguide.chem.fingerprint import Fingerprint, fingerprint_matrix
from molguide.chem.similarity import best_similarities
from molguide.utils.config import KMEANS_MAX_ITER, N_CLUSTERS
from molguide.utils.errors import DatasetError
from molguide.utils.logger import get_logger

log = get_logger(__name__)


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Centroids (k, width) and the cluster of every clustered fingerprint."""
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    seed: int
    objective_history: list[float] = field(default_factory=list)

    @property
    def n_iter(self) -> int:
        return len(self.objective_history)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignments, minlength=self.k)


def tanimoto_distance(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    """1 − ⟨x,c⟩ / (‖x‖² + ‖c‖² − ⟨x,c⟩) between the rows of x (N, W) and c (k, W).

    Two all-zero vectors are at distance 0.
    """
    inner = x @ c.T
    denom = (x * x).sum(axis=1)[:, None] + (c * c).sum(axis=1)[None, :] - inner
    sim = np.divide(inner, denom, out=np.ones_like(inner), where=denom > 0)
    return 1.0 - sim


def _seed_centroids(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++: each next seed drawn with probability ∝ squared distance."""
    n = len(x)
    chosen = [int(rng.integers(n))]
    closest = tanimoto_distance(x, x[chosen]).min(axis=1)
    while len(chosen) < k:
        weights = closest ** 2
        weights[chosen] = 0.0
        if weights.sum() > 0:
            pick = int(rng.choice(n, p=weights / weights.sum()))
        else:
            pick = next(i for i in range(n) if i not in chosen)
        chosen.append(pick)
        closest = np.minimum(closest, tanimoto_distance(x, x[[pick]])[:, 0])
    return x[chosen].copy()


def _objective(x: np.ndarray, centroids: np.ndarray, assign: np.ndarray) -> float:
    return float(tanimoto_distance(x, centroids)[np.arange(len(x)), assign].sum())


def kmeans_fingerprints(
    fps: Sequence[Fingerprint],
    k: int = N_CLUSTERS,
    seed: int = 0,
    max_iter: int = KMEANS_MAX_ITER,
) -> ClusterModel:
    """Cluster fingerprints into k groups.

    Bit vectors are lifted to 0/1 reals and centroids are member means. A
    cluster's mean update is kept only when it does not raise that
    cluster's summed distance, so the objective never increases; empty
    clusters keep their centroid. Stops at an assignment fixed point or
    after ``max_iter`` rounds.

    Raises:
        DatasetError: fewer fingerprints than clusters.
    """
    if k < 1 or len(fps) < k:
        raise DatasetError(f"need at least k={k} fingerprints, got {len(fps)}")
    x = fingerprint_matrix(fps).astype(np.float64)
    rng = np.random.default_rng(seed)
    centroids = _seed_centroids(x, k, rng)

    assign = None
    history: list[float] = []
    for _ in range(max_iter):
        new_assign = np.argmin(tanimoto_distance(x, centroids), axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if len(members) == 0:
                continue
            candidate = members.mean(axis=0, keepdims=True)
            old = tanimoto_distance(members, centroids[[c]]).sum()
            new = tanimoto_distance(members, candidate).sum()
            if new <= old:
                centroids[c] = candidate[0]
        history.append(_objective(x, centroids, assign))

    log.info("k-means: k=%d, %d points, %d iterations, objective %.4f",
             k, len(x), len(history), history[-1] if history else 0.0)
    return ClusterModel(k, centroids, assign, seed, history)


def assign_clusters(
    model: ClusterModel,
    actives: Sequence[Fingerprint],
    candidates: Sequence[Fingerprint],
) -> np.ndarray:
    """Cluster of each candidate's most similar active (1-NN, ties to the lowest index).

    ``actives`` must be the fingerprints the model was fitted on, in order.

    Raises:
        DatasetError: no actives, or actives that do not match the model.
    """
    if not actives:
        raise DatasetError("cannot assign clusters without active molecules")
    if len(actives) != len(model.assignments):
        raise DatasetError("active fingerprints do not match the cluster model")
    if not candidates:
        return np.zeros(0, dtype=np.int64)
    nearest = best_similarities(actives, candidates).indices
    return model.assignments[nearest]
