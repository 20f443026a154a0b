"""Auxiliary cycle and spectral features fed to the graph transformer.

Computed on the "bond present" indicator of any symmetric bond matrix, so
they work on noisy intermediate graphs as well as on molecules.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from molguide.chem.rings import adjacency_graph, simple_cycles

CYCLE_LENGTHS = (3, 4, 5, 6)
N_EIGENVALUES = 5
EIGEN_ZERO_TOL = 1e-8
EIGEN_DEGENERACY_TOL = 1e-6
MOMENT_TOL = 1e-9

NODE_FEATURE_DIM = len(CYCLE_LENGTHS) + 1          # cycle counts + Fiedler entry
GLOBAL_FEATURE_DIM = 2 + N_EIGENVALUES + len(CYCLE_LENGTHS)  # t/T, components, eigs, totals


@dataclass(frozen=True, eq=False)
class AuxFeatures:
    """Per-node and per-graph structural features plus the time embedding."""
    node_cycle_counts: np.ndarray    # (n, 4)
    graph_cycle_totals: np.ndarray   # (4,)
    n_components: int
    eigenvalues: np.ndarray          # (5,) ascending, zero-padded
    fiedler: np.ndarray              # (n,)
    time: float

    def node_matrix(self) -> np.ndarray:
        """(n, NODE_FEATURE_DIM) node input block."""
        return np.concatenate([self.node_cycle_counts, self.fiedler[:, None]], axis=1)

    def global_vector(self) -> np.ndarray:
        """(GLOBAL_FEATURE_DIM,) graph input block."""
        return np.concatenate([
            [self.time, float(self.n_components)],
            self.eigenvalues,
            self.graph_cycle_totals,
        ])


def cycle_counts(adjacency: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-node and total simple-cycle counts for lengths 3, 4, 5, 6.

    Lengths 3 and 4 use closed forms on adjacency-matrix powers; 5 and 6
    are enumerated.
    """
    a = adjacency.astype(np.float64)
    n = a.shape[0]
    node = np.zeros((n, len(CYCLE_LENGTHS)))
    totals = np.zeros(len(CYCLE_LENGTHS))

    deg = a.sum(axis=1)
    a2 = a @ a
    a3 = a2 @ a
    a4 = a2 @ a2
    node[:, 0] = np.diag(a3) / 2.0
    totals[0] = np.trace(a3) / 6.0
    # closed 4-walks minus the back-and-forth ones, two directions per cycle
    node[:, 1] = (np.diag(a4) - deg * deg - a @ (deg - 1.0)) / 2.0
    totals[1] = node[:, 1].sum() / 4.0

    for cycle in simple_cycles(adjacency, max_length=6):
        k = len(cycle)
        if k < 5:
            continue
        column = CYCLE_LENGTHS.index(k)
        totals[column] += 1
        node[list(cycle), column] += 1
    return np.rint(node), np.rint(totals)


def laplacian(adjacency: np.ndarray) -> np.ndarray:
    a = adjacency.astype(np.float64)
    return np.diag(a.sum(axis=1)) - a


def spectral_features(adjacency: np.ndarray) -> tuple[int, np.ndarray, np.ndarray]:
    """Component count, 5 smallest nonzero Laplacian eigenvalues, Fiedler entries.

    A simple Fiedler eigenvalue gives the eigenvector with its sign fixed
    by a positive third moment. When that moment vanishes, or the
    eigenvalue is repeated, the diagonal of the projector onto its
    eigenspace is used instead, which does not depend on the basis
    eigh happens to return.
    """
    n = adjacency.shape[0]
    components = nx.number_connected_components(adjacency_graph(adjacency))
    values, vectors = np.linalg.eigh(laplacian(adjacency))
    values = np.clip(values, 0.0, None)
    nonzero = np.flatnonzero(values > EIGEN_ZERO_TOL)

    eigs = np.zeros(N_EIGENVALUES)
    take = values[nonzero[:N_EIGENVALUES]]
    eigs[:len(take)] = take

    fiedler = np.zeros(n)
    if len(nonzero):
        lam = values[nonzero[0]]
        same = np.abs(values - lam) < EIGEN_DEGENERACY_TOL * max(1.0, lam)
        space = vectors[:, same & (values > EIGEN_ZERO_TOL)]
        moment = float(np.sum(space[:, 0] ** 3))
        if space.shape[1] == 1 and abs(moment) > MOMENT_TOL:
            fiedler = space[:, 0] if moment > 0 else -space[:, 0]
        else:
            fiedler = np.sum(space ** 2, axis=1)
    return components, eigs, fiedler


def aux_from_adjacency(adjacency: np.ndarray, t: int, T: int) -> AuxFeatures:
    adjacency = np.asarray(adjacency, dtype=bool)
    node, totals = cycle_counts(adjacency)
    components, eigs, fiedler = spectral_features(adjacency)
    return AuxFeatures(
        node_cycle_counts=node,
        graph_cycle_totals=totals,
        n_components=components,
        eigenvalues=eigs,
        fiedler=fiedler,
        time=t / T,
    )


def cycle_spectral_features(g, t: int, T: int) -> AuxFeatures:
    """Features of a MolecularGraph, OneHotGraph or bool adjacency at step t of T."""
    adjacency = g.adjacency if hasattr(g, "adjacency") else g
    return aux_from_adjacency(adjacency, t, T)
