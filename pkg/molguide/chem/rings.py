"""Ring perception (smallest set of smallest rings) and cycle enumeration.

Rings are found with a Horton-style candidate set (two BFS shortest paths
closed by one edge) reduced to a minimum cycle basis by GF(2) elimination
over edge-incidence bitmasks.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby
from typing import TYPE_CHECKING, Iterable

import networkx as nx
import numpy as np

if TYPE_CHECKING:
    from molguide.chem.graph import MolecularGraph


@dataclass(frozen=True)
class RingInfo:
    """SSSR plus per-atom and per-bond ring membership."""
    rings: tuple[tuple[int, ...], ...]
    atom_in_ring: tuple[bool, ...]
    bond_in_ring: frozenset[tuple[int, int]]

    @property
    def count(self) -> int:
        return len(self.rings)

    def sizes(self) -> list[int]:
        return [len(r) for r in self.rings]

    def is_ring_bond(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.bond_in_ring


def adjacency_graph(adjacency: np.ndarray) -> nx.Graph:
    """Undirected networkx graph with nodes 0..n-1 and edges in index order."""
    n = adjacency.shape[0]
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    rows, cols = np.nonzero(np.triu(adjacency, k=1))
    graph.add_edges_from(zip(rows.tolist(), cols.tolist()))
    return graph


def cycle_rank(adjacency: np.ndarray) -> int:
    """|edges| - |nodes| + |components|."""
    graph = adjacency_graph(adjacency)
    return (
        graph.number_of_edges()
        - graph.number_of_nodes()
        + nx.number_connected_components(graph)
    )


def ring_edges(ring: Iterable[int]) -> list[tuple[int, int]]:
    """Consecutive atom pairs of a ring (closing pair included), i < j."""
    ring = list(ring)
    return [
        (min(a, b), max(a, b))
        for a, b in zip(ring, ring[1:] + ring[:1])
    ]


def _normalize_cycle(cycle: list[int]) -> tuple[int, ...]:
    start = cycle.index(min(cycle))
    rotated = cycle[start:] + cycle[:start]
    if len(rotated) > 2 and rotated[-1] < rotated[1]:
        rotated = [rotated[0]] + rotated[:0:-1]
    return tuple(rotated)


def _reduce(mask: int, basis: dict[int, int]) -> int:
    """Remainder of an edge bitmask after GF(2) elimination against ``basis``."""
    while mask:
        pivot = mask.bit_length() - 1
        if pivot not in basis:
            return mask
        mask ^= basis[pivot]
    return 0


def _insert(mask: int, basis: dict[int, int]) -> bool:
    """Add ``mask`` to the basis (pivot bit -> vector); False if already spanned."""
    reduced = _reduce(mask, basis)
    if reduced:
        basis[reduced.bit_length() - 1] = reduced
    return bool(reduced)


def sssr(adjacency: np.ndarray) -> list[tuple[int, ...]]:
    """Smallest set of smallest rings of an undirected graph.

    Among equal-length candidates the lexicographically smallest sorted
    atom tuple wins.
    """
    graph = adjacency_graph(adjacency)
    rank = (
        graph.number_of_edges()
        - graph.number_of_nodes()
        + nx.number_connected_components(graph)
    )
    if rank == 0:
        return []

    edge_index = {
        (min(u, v), max(u, v)): k for k, (u, v) in enumerate(graph.edges())
    }

    candidates: dict[int, tuple[int, ...]] = {}
    for v in graph.nodes():
        paths = nx.single_source_shortest_path(graph, v)
        for x, y in edge_index:
            px, py = paths.get(x), paths.get(y)
            if px is None or py is None:
                continue
            if set(px) & set(py) != {v}:
                continue
            cycle = px + py[:0:-1]
            if len(cycle) < 3:
                continue
            mask = 0
            for e in ring_edges(cycle):
                mask |= 1 << edge_index[e]
            candidates.setdefault(mask, _normalize_cycle(cycle))

    ordered = sorted(candidates.items(), key=lambda kv: (len(kv[1]), tuple(sorted(kv[1]))))

    basis: dict[int, int] = {}
    rings: list[tuple[int, ...]] = []
    for mask, cycle in ordered:
        if _insert(mask, basis):
            rings.append(cycle)
        if len(rings) == rank:
            break
    return rings


def perceive_rings(g: "MolecularGraph") -> RingInfo:
    """Perceive the SSSR of a molecular graph."""
    rings = sssr(g.adjacency)
    atom_in_ring = [False] * g.n
    bonds: set[tuple[int, int]] = set()
    for ring in rings:
        for a in ring:
            atom_in_ring[a] = True
        bonds.update(ring_edges(ring))
    return RingInfo(
        rings=tuple(rings),
        atom_in_ring=tuple(atom_in_ring),
        bond_in_ring=frozenset(bonds),
    )


def simple_cycles(adjacency: np.ndarray, max_length: int) -> list[tuple[int, ...]]:
    """All simple cycles of length 3..max_length, each reported once."""
    graph = adjacency_graph(adjacency)
    cycles = []
    for cycle in nx.simple_cycles(graph, length_bound=max_length):
        if len(cycle) >= 3:
            cycles.append(_normalize_cycle(list(cycle)))
    return sorted(set(cycles), key=lambda c: (len(c), c))


def relevant_cycles(adjacency: np.ndarray, max_length: int) -> list[tuple[int, ...]]:
    """Relevant rings of length 3..max_length.

    A cycle is relevant when it is not a GF(2) sum of strictly shorter
    cycles, so it belongs to some minimum cycle basis. SSSR rings within
    the bound are included; envelope cycles (the 6-cycle around a fused
    5/3 pair) are not.
    """
    edge_index: dict[tuple[int, int], int] = {}

    def mask(cycle: tuple[int, ...]) -> int:
        bits = 0
        for e in ring_edges(cycle):
            bits |= 1 << edge_index.setdefault(e, len(edge_index))
        return bits

    basis: dict[int, int] = {}
    relevant = []
    for _, group in groupby(simple_cycles(adjacency, max_length), key=len):
        masks = [(cycle, mask(cycle)) for cycle in group]
        relevant += [cycle for cycle, bits in masks if _reduce(bits, basis)]
        for _, bits in masks:
            _insert(bits, basis)
    return relevant
