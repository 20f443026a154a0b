"""Molecular graph data model, valence checking and kekulization.

A molecule is a list of heavy atoms plus a symmetric matrix of bond
classes. Hydrogens are implicit: their count is derived from the smallest
allowed valence that fits the bond-order sum (bracket atoms such as
``[nH]`` fix it explicitly).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from molguide.chem.elements import HYDROGEN_MASS, BondClass, Element
from molguide.chem.rings import perceive_rings
from molguide.utils.errors import InvalidMoleculeError, KekulizationError

MIN_AROMATIC_RING = 5


# ─── Data Model ─────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class MolecularGraph:
    """Immutable heavy-atom graph.

    Attributes:
        atoms: element of each node.
        bonds: n×n int8 matrix of BondClass values (symmetric, zero diagonal).
        fixed_h: per-atom explicit hydrogen count from bracket atoms
            (None entries are derived from valence), or None.
    """
    atoms: tuple[Element, ...]
    bonds: np.ndarray
    fixed_h: tuple[int | None, ...] | None = None

    def __post_init__(self) -> None:
        atoms = tuple(self.atoms)
        bonds = np.array(self.bonds, dtype=np.int8, copy=True)
        n = len(atoms)
        if n < 1:
            raise InvalidMoleculeError("A molecular graph needs at least one atom")
        if bonds.shape != (n, n):
            raise InvalidMoleculeError(f"Bond matrix shape {bonds.shape} != ({n}, {n})")
        if not np.array_equal(bonds, bonds.T):
            raise InvalidMoleculeError("Bond matrix is not symmetric")
        if np.any(np.diag(bonds) != BondClass.NONE):
            raise InvalidMoleculeError("Self-bonds are not allowed")
        if bonds.min() < 0 or bonds.max() >= len(BondClass):
            raise InvalidMoleculeError("Unknown bond class in bond matrix")
        bonds.flags.writeable = False
        fixed = self.fixed_h
        if fixed is not None:
            fixed = tuple(fixed)
            if len(fixed) != n:
                raise InvalidMoleculeError("fixed_h length does not match atom count")
            if all(h is None for h in fixed):
                fixed = None
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "bonds", bonds)
        object.__setattr__(self, "fixed_h", fixed)

    @classmethod
    def from_edges(
        cls,
        atoms: Sequence[Element],
        edges: Iterable[tuple[int, int, BondClass]],
        fixed_h: Sequence[int | None] | None = None,
    ) -> "MolecularGraph":
        n = len(atoms)
        bonds = np.zeros((n, n), dtype=np.int8)
        for i, j, bond in edges:
            bonds[i, j] = bonds[j, i] = int(bond)
        return cls(tuple(atoms), bonds, None if fixed_h is None else tuple(fixed_h))

    @property
    def n(self) -> int:
        return len(self.atoms)

    @cached_property
    def adjacency(self) -> np.ndarray:
        adj = self.bonds != BondClass.NONE
        adj.flags.writeable = False
        return adj

    @cached_property
    def _neighbors(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(np.flatnonzero(row).tolist()) for row in self.adjacency)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._neighbors[i]

    def degree(self, i: int) -> int:
        return len(self._neighbors[i])

    def bond(self, i: int, j: int) -> BondClass:
        return BondClass(int(self.bonds[i, j]))

    def edges(self) -> list[tuple[int, int, BondClass]]:
        rows, cols = np.nonzero(np.triu(self.bonds, k=1))
        return [(int(i), int(j), BondClass(int(self.bonds[i, j]))) for i, j in zip(rows, cols)]

    def is_aromatic_atom(self, i: int) -> bool:
        return bool(np.any(self.bonds[i] == BondClass.AROMATIC))

    def explicit_h(self, i: int) -> int | None:
        return None if self.fixed_h is None else self.fixed_h[i]

    @cached_property
    def implicit_h(self) -> tuple[int, ...]:
        return check_valence(self).implicit_h

    def permute(self, order: Sequence[int]) -> "MolecularGraph":
        """Relabel nodes: new atom k is old atom ``order[k]``."""
        order = list(order)
        bonds = self.bonds[np.ix_(order, order)]
        fixed = None if self.fixed_h is None else tuple(self.fixed_h[k] for k in order)
        return MolecularGraph(tuple(self.atoms[k] for k in order), bonds, fixed)

    def __repr__(self) -> str:
        return f"MolecularGraph(n={self.n}, bonds={len(self.edges())})"


@dataclass(frozen=True)
class ValenceReport:
    """Outcome of a valence check."""
    valid: bool
    violations: tuple[int, ...]
    implicit_h: tuple[int, ...]


# ─── Kekulization ───────────────────────────────────────────────────


def _bond_sum(g: MolecularGraph, i: int, aromatic_as: float) -> float:
    total = 0.0
    for j in g.neighbors(i):
        bond = g.bond(i, j)
        total += aromatic_as if bond == BondClass.AROMATIC else bond.order
    return total


def kekulize(g: MolecularGraph) -> MolecularGraph:
    """Replace aromatic bonds by an alternating single/double assignment.

    Atoms whose valence leaves room for one more bond order (counting each
    aromatic bond as single) must receive exactly one double bond; the
    double bonds are a perfect matching of those atoms over the aromatic
    subgraph.

    Raises:
        KekulizationError: no such matching exists, or an aromatic atom
            already exceeds every allowed valence.
    """
    aromatic = g.bonds == BondClass.AROMATIC
    if not aromatic.any():
        return g

    need: list[int] = []
    overfull: list[int] = []
    for i in range(g.n):
        if not aromatic[i].any():
            continue
        used = int(_bond_sum(g, i, aromatic_as=1.0)) + (g.explicit_h(i) or 0)
        valence = g.atoms[i].smallest_valence(used)
        if valence is None:
            overfull.append(i)
        elif valence - used >= 1:
            need.append(i)
    if overfull:
        raise KekulizationError("Aromatic atoms exceed their valence", tuple(overfull))

    matching_graph = nx.Graph()
    matching_graph.add_nodes_from(need)
    need_set = set(need)
    rows, cols = np.nonzero(np.triu(aromatic, k=1))
    for i, j in zip(rows.tolist(), cols.tolist()):
        if i in need_set and j in need_set:
            matching_graph.add_edge(i, j)
    matching = nx.max_weight_matching(matching_graph, maxcardinality=True)
    matched = {a for edge in matching for a in edge}
    unmatched = tuple(sorted(need_set - matched))
    if unmatched:
        raise KekulizationError("No valid kekulization", unmatched)

    bonds = np.array(g.bonds)
    bonds[aromatic] = BondClass.SINGLE
    for i, j in matching:
        bonds[i, j] = bonds[j, i] = BondClass.DOUBLE
    return MolecularGraph(g.atoms, bonds, g.fixed_h)


# ─── Valence ────────────────────────────────────────────────────────


def check_valence(g: MolecularGraph) -> ValenceReport:
    """Validity verdict with the offending atoms and implicit H counts.

    Aromatic systems are kekulized first. Aromatic bonds outside rings,
    aromatic rings smaller than five atoms and aromatic halogens are
    violations, as is any atom whose bond-order sum exceeds every allowed
    valence.
    """
    violations: set[int] = set()
    try:
        kek = kekulize(g)
    except KekulizationError as e:
        violations.update(e.atoms)
        kek = g

    if np.any(g.bonds == BondClass.AROMATIC):
        rings = perceive_rings(g)
        for i, j, bond in g.edges():
            if bond == BondClass.AROMATIC and not rings.is_ring_bond(i, j):
                violations.update((i, j))
        for ring in rings.rings:
            if len(ring) >= MIN_AROMATIC_RING:
                continue
            ring_list = list(ring)
            pairs = zip(ring_list, ring_list[1:] + ring_list[:1])
            if all(g.bonds[a, b] == BondClass.AROMATIC for a, b in pairs):
                violations.update(ring)
        for i in range(g.n):
            if g.is_aromatic_atom(i) and not g.atoms[i].aromatic_capable:
                violations.add(i)

    implicit: list[int] = []
    for i, element in enumerate(g.atoms):
        used = int(round(_bond_sum(kek, i, aromatic_as=1.0)))
        fixed = kek.explicit_h(i)
        total = used + (fixed or 0)
        valence = element.smallest_valence(total)
        if valence is None:
            violations.add(i)
            implicit.append(fixed or 0)
        elif fixed is not None:
            implicit.append(fixed)
        else:
            implicit.append(valence - total)

    return ValenceReport(
        valid=not violations,
        violations=tuple(sorted(violations)),
        implicit_h=tuple(implicit),
    )


def require_valid(g: MolecularGraph) -> ValenceReport:
    """check_valence that raises InvalidMoleculeError on failure."""
    report = check_valence(g)
    if not report.valid:
        raise InvalidMoleculeError(
            f"Valence violation at atoms {list(report.violations)}", report.violations
        )
    return report


def molecular_weight(g: MolecularGraph) -> float:
    """Average molecular weight in daltons, implicit hydrogens included."""
    heavy = sum(a.mass for a in g.atoms)
    return round(heavy + HYDROGEN_MASS * sum(g.implicit_h), 4)
