"""SMILES reading and canonical writing for the supported organic subset.

Accepted: C N O S F Cl Br, aromatic c n o s, bracket atoms carrying only an
element and an H count (``[nH]``, ``[CH2]``), bonds ``- = # :``, branches,
ring closures 1-9 and %nn, and ``.`` between fragments. Charges,
isotopes, stereo markers, atom classes and wildcards are rejected.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from molguide.chem.elements import BondClass, Element
from molguide.chem.graph import MolecularGraph, check_valence, require_valid
from molguide.chem.rings import adjacency_graph, perceive_rings
from molguide.utils.errors import (
    SmilesSyntaxError,
    UnbalancedParenthesisError,
    UnclosedRingError,
    UnsupportedElementError,
    UnsupportedFeatureError,
)

BOND_SYMBOLS = {
    "-": BondClass.SINGLE,
    "=": BondClass.DOUBLE,
    "#": BondClass.TRIPLE,
    ":": BondClass.AROMATIC,
}
AROMATIC_SYMBOLS = {"c": Element.C, "n": Element.N, "o": Element.O, "s": Element.S}
ORGANIC_SYMBOLS = {"C", "N", "O", "S", "F", "Cl", "Br"}
UNSUPPORTED_ORGANIC = {"B", "P", "I", "b", "p", "*"}


# ─── Parsing ────────────────────────────────────────────────────────


@dataclass
class _Builder:
    atoms: list[Element] = field(default_factory=list)
    aromatic: list[bool] = field(default_factory=list)
    fixed_h: list[int | None] = field(default_factory=list)
    atom_pos: list[int] = field(default_factory=list)
    bonds: dict[tuple[int, int], BondClass] = field(default_factory=dict)

    def add_atom(self, element: Element, aromatic: bool, h: int | None, pos: int) -> int:
        self.atoms.append(element)
        self.aromatic.append(aromatic)
        self.fixed_h.append(h)
        self.atom_pos.append(pos)
        return len(self.atoms) - 1

    def add_bond(self, i: int, j: int, symbol: str | None, pos: int) -> None:
        key = (min(i, j), max(i, j))
        if i == j:
            raise SmilesSyntaxError("Ring closure onto the same atom", pos)
        if key in self.bonds:
            raise SmilesSyntaxError("Duplicate bond between the same atoms", pos)
        if symbol is None:
            bond = (
                BondClass.AROMATIC
                if self.aromatic[i] and self.aromatic[j]
                else BondClass.SINGLE
            )
        else:
            bond = BOND_SYMBOLS[symbol]
        self.bonds[key] = bond

    def build(self) -> MolecularGraph:
        n = len(self.atoms)
        matrix = np.zeros((n, n), dtype=np.int8)
        for (i, j), bond in self.bonds.items():
            matrix[i, j] = matrix[j, i] = int(bond)
        for i, is_aromatic in enumerate(self.aromatic):
            if is_aromatic and not np.any(matrix[i] == BondClass.AROMATIC):
                raise SmilesSyntaxError("Aromatic atom without aromatic bonds", self.atom_pos[i])
        fixed = tuple(self.fixed_h) if any(h is not None for h in self.fixed_h) else None
        return MolecularGraph(tuple(self.atoms), matrix, fixed)


def _parse_bracket(text: str, start: int) -> tuple[Element, bool, int, int]:
    """Parse ``[...]`` starting at ``start``; returns element, aromatic, H, end."""
    end = text.find("]", start)
    if end < 0:
        raise SmilesSyntaxError("Unterminated bracket atom", start)
    body = text[start + 1:end]
    pos = start + 1
    if not body:
        raise SmilesSyntaxError("Empty bracket atom", start)
    if body[0].isdigit():
        raise UnsupportedFeatureError("Isotopes are not supported", pos)

    if body[:2] in ("Cl", "Br"):
        symbol, k = body[:2], 2
    else:
        symbol, k = body[:1], 1
    if k == 1 and symbol.isupper() and len(body) > 1 and body[1].islower():
        raise UnsupportedElementError(f"Unsupported element '{body[:2]}'", pos)
    if symbol in AROMATIC_SYMBOLS:
        element, aromatic = AROMATIC_SYMBOLS[symbol], True
    elif symbol in ORGANIC_SYMBOLS:
        element, aromatic = Element.from_symbol(symbol), False
    elif symbol.isalpha() or symbol == "*":
        # Take the full symbol (e.g. "Se", "Na") for the message.
        full = symbol + (body[k] if k < len(body) and body[k].islower() else "")
        raise UnsupportedElementError(f"Unsupported element '{full}'", pos)
    else:
        raise SmilesSyntaxError(f"Unexpected '{symbol}' in bracket atom", pos)

    h = 0
    rest = body[k:]
    offset = pos + k
    if rest.startswith("@"):
        raise UnsupportedFeatureError("Stereo markers are not supported", offset)
    if rest.startswith("H"):
        digits = ""
        j = 1
        while j < len(rest) and rest[j].isdigit():
            digits += rest[j]
            j += 1
        h = int(digits) if digits else 1
        rest = rest[j:]
        offset += j
    if rest:
        if rest[0] in "+-":
            raise UnsupportedFeatureError("Formal charges are not supported", offset)
        if rest[0] == ":":
            raise UnsupportedFeatureError("Atom classes are not supported", offset)
        if rest[0] == "@":
            raise UnsupportedFeatureError("Stereo markers are not supported", offset)
        raise SmilesSyntaxError(f"Unexpected '{rest[0]}' in bracket atom", offset)
    return element, aromatic, h, end + 1


def parse_smiles(text: str) -> MolecularGraph:
    """Parse a SMILES string into a MolecularGraph.

    Raises:
        SmilesSyntaxError: malformed input (position reported).
        UnsupportedElementError: element outside C N O S F Cl Br.
        UnclosedRingError: a ring-closure index is never closed.
        UnbalancedParenthesisError: unmatched ``(`` or ``)``.
        UnsupportedFeatureError: charge, isotope, stereo or atom class.
    """
    if not text:
        raise SmilesSyntaxError("Empty SMILES", 0)
    if not text.isascii():
        raise SmilesSyntaxError("SMILES must be ASCII", 0)

    b = _Builder()
    prev: int | None = None
    pending: tuple[str, int] | None = None
    branches: list[tuple[int, int]] = []
    open_rings: dict[int, tuple[int, str | None, int]] = {}
    i = 0

    def attach(atom: int, pos: int) -> None:
        nonlocal prev, pending
        if prev is not None:
            b.add_bond(prev, atom, pending[0] if pending else None, pos)
        elif pending is not None:
            raise SmilesSyntaxError("Bond without a preceding atom", pending[1])
        pending = None
        prev = atom

    while i < len(text):
        c = text[i]
        if c == "(":
            if prev is None:
                raise SmilesSyntaxError("Branch without a preceding atom", i)
            if pending is not None:
                raise SmilesSyntaxError("Bond before a branch", pending[1])
            branches.append((prev, i))
            i += 1
        elif c == ")":
            if not branches:
                raise UnbalancedParenthesisError("Unmatched ')'", i)
            if pending is not None:
                raise SmilesSyntaxError("Dangling bond at end of branch", pending[1])
            prev = branches.pop()[0]
            i += 1
        elif c in BOND_SYMBOLS:
            if prev is None or pending is not None:
                raise SmilesSyntaxError(f"Unexpected bond '{c}'", i)
            pending = (c, i)
            i += 1
        elif c in "/\\":
            raise UnsupportedFeatureError("Stereo bonds are not supported", i)
        elif c == ".":
            if pending is not None:
                raise SmilesSyntaxError("Bond before '.'", pending[1])
            prev = None
            i += 1
        elif c.isdigit() or c == "%":
            pos = i
            if c == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesSyntaxError("'%' must be followed by two digits", i)
                number = int(digits)
                i += 3
            else:
                number = int(c)
                i += 1
            if prev is None:
                raise SmilesSyntaxError("Ring closure without a preceding atom", pos)
            symbol = pending[0] if pending else None
            pending = None
            if number in open_rings:
                other, other_symbol, _ = open_rings.pop(number)
                if symbol and other_symbol and symbol != other_symbol:
                    raise SmilesSyntaxError("Conflicting ring-closure bonds", pos)
                b.add_bond(other, prev, symbol or other_symbol, pos)
            else:
                open_rings[number] = (prev, symbol, pos)
        elif c == "[":
            element, aromatic, h, end = _parse_bracket(text, i)
            attach(b.add_atom(element, aromatic, h, i), i)
            i = end
        elif c.isalpha() or c == "*":
            two = text[i:i + 2]
            if two in ("Cl", "Br"):
                symbol, width = two, 2
            else:
                symbol, width = c, 1
            if symbol in ORGANIC_SYMBOLS:
                atom = b.add_atom(Element.from_symbol(symbol), False, None, i)
            elif symbol in AROMATIC_SYMBOLS:
                atom = b.add_atom(AROMATIC_SYMBOLS[symbol], True, None, i)
            elif symbol in UNSUPPORTED_ORGANIC or c.isupper():
                raise UnsupportedElementError(f"Unsupported element '{symbol}'", i)
            else:
                raise SmilesSyntaxError(f"Unexpected character '{c}'", i)
            attach(atom, i)
            i += width
        elif c in "+-":
            raise UnsupportedFeatureError("Formal charges are not supported", i)
        else:
            raise SmilesSyntaxError(f"Unexpected character '{c}'", i)

    if pending is not None:
        raise SmilesSyntaxError("Dangling bond at end of input", pending[1])
    if branches:
        raise UnbalancedParenthesisError("Unclosed '('", branches[-1][1])
    if open_rings:
        number, (_, _, pos) = min(open_rings.items(), key=lambda kv: kv[1][2])
        raise UnclosedRingError(f"Ring index {number} is never closed", pos)
    if not b.atoms:
        raise SmilesSyntaxError("No atoms in SMILES", 0)
    return b.build()


# ─── Canonical form ─────────────────────────────────────────────────


def _dense_rank(keys: list) -> list[int]:
    order = {k: r for r, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def _refine(g: MolecularGraph, ranks: list[int]) -> list[int]:
    while True:
        keys = [
            (
                ranks[i],
                tuple(sorted((int(g.bonds[i, j]), ranks[j]) for j in g.neighbors(i))),
            )
            for i in range(g.n)
        ]
        refined = _dense_rank(keys)
        if len(set(refined)) == len(set(ranks)):
            return refined
        ranks = refined


def _initial_ranks(g: MolecularGraph, h: tuple[int, ...]) -> list[int]:
    ring = perceive_rings(g).atom_in_ring
    return _refine(g, _dense_rank([
        (g.atoms[i].index, g.degree(i), h[i], g.is_aromatic_atom(i), ring[i])
        for i in range(g.n)
    ]))


def _target_cell(ranks: list[int]) -> list[int]:
    """Atoms sharing the lowest rank that is held by more than one atom."""
    counts = Counter(ranks)
    tied = min(r for r, c in counts.items() if c > 1)
    return [i for i, r in enumerate(ranks) if r == tied]


def _twins(g: MolecularGraph, a: int, b: int) -> bool:
    """Same bond to every other atom, so swapping a and b is an automorphism."""
    others = np.ones(g.n, dtype=bool)
    others[[a, b]] = False
    return bool(np.array_equal(g.bonds[a, others], g.bonds[b, others]))


def _components(g: MolecularGraph) -> list[list[int]]:
    return sorted(sorted(c) for c in nx.connected_components(adjacency_graph(g.adjacency)))


def _component_form(g: MolecularGraph) -> tuple[str, tuple[int, ...]]:
    """Canonical SMILES of a connected graph and its atoms in written order.

    Atoms left tied by refinement are individualized one at a time and
    refined again; every branch is followed to a discrete ranking and the
    smallest resulting string wins. Twins in a tied cell give the same
    strings, so only one of them is branched on.
    """
    h = check_valence(g).implicit_h
    aromatic = [g.is_aromatic_atom(i) for i in range(g.n)]
    best: tuple[str, tuple[int, ...]] | None = None
    pending = [_initial_ranks(g, h)]
    while pending:
        ranks = pending.pop()
        if len(set(ranks)) == g.n:
            form = _write_connected(g, ranks, h, aromatic)
            if best is None or form[0] < best[0]:
                best = form
            continue
        tried: list[int] = []
        for atom in _target_cell(ranks):
            if any(_twins(g, atom, other) for other in tried):
                continue
            tried.append(atom)
            split = _dense_rank([(r, 0 if i == atom else 1) for i, r in enumerate(ranks)])
            pending.append(_refine(g, split))
    return best


def _canonical_form(g: MolecularGraph) -> tuple[str, tuple[int, ...]]:
    """Fragments are written separately and joined in sorted order."""
    forms = []
    for nodes in _components(g):
        text, order = _component_form(g.permute(nodes))
        forms.append((text, tuple(nodes[k] for k in order)))
    forms.sort(key=lambda form: form[0])
    return ".".join(text for text, _ in forms), tuple(a for _, order in forms for a in order)


def canonical_ranks(g: MolecularGraph) -> tuple[int, ...]:
    """Permutation-invariant ranking of the atoms: position in the canonical SMILES.

    Isomorphic graphs relabelled by these ranks have identical bond matrices.
    """
    ranks = [0] * g.n
    for position, atom in enumerate(_canonical_form(g)[1]):
        ranks[atom] = position
    return tuple(ranks)


# ─── Writing ────────────────────────────────────────────────────────


def _ring_label(number: int) -> str:
    return str(number) if number < 10 else f"%{number:02d}"


def _organic_h(g: MolecularGraph, i: int) -> int:
    used = int(sum(g.bond(i, j).order for j in g.neighbors(i)))
    valence = g.atoms[i].smallest_valence(used)
    return 0 if valence is None else valence - used


def _bond_symbol(g: MolecularGraph, aromatic: list[bool], a: int, c: int) -> str:
    bond = g.bond(a, c)
    if bond == BondClass.SINGLE:
        return "-" if aromatic[a] and aromatic[c] else ""
    if bond == BondClass.DOUBLE:
        return "="
    if bond == BondClass.TRIPLE:
        return "#"
    return ""


def _atom_symbol(g: MolecularGraph, h: tuple[int, ...], aromatic: list[bool], a: int) -> str:
    element = g.atoms[a]
    symbol = element.symbol.lower() if aromatic[a] else element.symbol
    if aromatic[a]:
        bracket = element != Element.C and h[a] > 0
    else:
        bracket = h[a] != _organic_h(g, a)
    if not bracket:
        return symbol
    h_part = "" if h[a] == 0 else "H" if h[a] == 1 else f"H{h[a]}"
    return f"[{symbol}{h_part}]"


def _write_connected(
    g: MolecularGraph,
    ranks: list[int],
    h: tuple[int, ...],
    aromatic: list[bool],
) -> tuple[str, tuple[int, ...]]:
    """SMILES of a connected graph from a discrete ranking, plus the written atom order.

    The DFS starts at rank 0 and visits neighbours in rank order. Both the
    traversal and the emission use explicit stacks.
    """
    def by_rank(atoms):
        return sorted(atoms, key=lambda a: ranks[a])

    start = min(range(g.n), key=lambda a: ranks[a])
    visited = [False] * g.n
    discovery = [0] * g.n
    order = [start]
    children: list[list[int]] = [[] for _ in range(g.n)]
    opens: list[list[int]] = [[] for _ in range(g.n)]
    closes: list[list[int]] = [[] for _ in range(g.n)]
    closure_edges: set[tuple[int, int]] = set()

    visited[start] = True
    stack = [(start, None, iter(by_rank(g.neighbors(start))))]
    while stack:
        u, parent, remaining = stack[-1]
        v = next(remaining, None)
        if v is None:
            stack.pop()
            continue
        if v == parent:
            continue
        if visited[v]:
            key = (min(u, v), max(u, v))
            if key not in closure_edges:
                closure_edges.add(key)
                opens[v].append(u)
                closes[u].append(v)
            continue
        children[u].append(v)
        visited[v] = True
        discovery[v] = len(order)
        order.append(v)
        stack.append((v, u, iter(by_rank(g.neighbors(v)))))

    in_use: dict[tuple[int, int], int] = {}
    out: list[str] = []
    # items are atom indices to emit or literal text
    work: list[int | str] = [start]
    while work:
        item = work.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        u = item
        out.append(_atom_symbol(g, h, aromatic, u))
        for v in sorted(opens[u], key=lambda a: discovery[a]):
            used = set(in_use.values())
            number = 1
            while number in used:
                number += 1
            in_use[(u, v)] = number
            out.append(_bond_symbol(g, aromatic, u, v) + _ring_label(number))
        for v in sorted(closes[u], key=lambda a: discovery[a]):
            out.append(_ring_label(in_use.pop((v, u))))
        kids = children[u]
        sequence: list[int | str] = []
        for k, v in enumerate(kids):
            last = k == len(kids) - 1
            if not last:
                sequence.append("(")
            sequence += [_bond_symbol(g, aromatic, u, v), v]
            if not last:
                sequence.append(")")
        work.extend(reversed(sequence))
    return "".join(out), tuple(order)


def write_smiles(g: MolecularGraph) -> str:
    """Deterministic canonical SMILES, independent of the input atom order.

    Raises:
        InvalidMoleculeError: the graph fails the valence check.
    """
    require_valid(g)
    return _canonical_form(g)[0]


def canonical_smiles(text: str) -> str:
    """Parse and re-write; raises the parser's or the writer's errors."""
    return write_smiles(parse_smiles(text))
