"""Fused five/six-membered ring detection."""

from __future__ import annotations

from itertools import combinations
from typing import Iterable

import networkx as nx
import numpy as np

from molguide.chem.rings import adjacency_graph, relevant_cycles, ring_edges
from molguide.utils.errors import DatasetError

FUSED_RING_SIZES = (5, 6)


def _cyclic_blocks(adjacency: np.ndarray) -> list[list[int]]:
    """Node sets of biconnected components big enough to hold a 5-ring."""
    graph = adjacency_graph(adjacency)
    return [sorted(c) for c in nx.biconnected_components(graph) if len(c) >= min(FUSED_RING_SIZES)]


def has_fused_ring_56(g) -> bool:
    """True iff two distinct relevant rings of size 5 or 6 share at least one bond.

    Accepts a MolecularGraph or a bool adjacency matrix. Relevant rings
    are the SSSR extended by every equally small alternative, so the
    envelope of a 5-ring fused to a 3-ring does not count as a 6-ring.
    Rings sharing a bond always lie in the same biconnected block, and
    relevance is decided block by block.
    """
    adjacency = np.asarray(g.adjacency if hasattr(g, "adjacency") else g, dtype=bool)
    for block in _cyclic_blocks(adjacency):
        sub = adjacency[np.ix_(block, block)]
        rings = [c for c in relevant_cycles(sub, max(FUSED_RING_SIZES)) if len(c) in FUSED_RING_SIZES]
        bond_sets = [set(ring_edges(c)) for c in rings]
        for a, b in combinations(bond_sets, 2):
            if a & b:
                return True
    return False


def structure_proportion(molecules: Iterable) -> float:
    """Fraction of molecules containing a fused 5/6 ring pair.

    Raises:
        DatasetError: empty collection.
    """
    flags = [has_fused_ring_56(m) for m in molecules]
    if not flags:
        raise DatasetError("structure proportion of an empty set is undefined")
    return sum(flags) / len(flags)
