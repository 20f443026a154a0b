"""Heavy-atom elements and bond classes of the molecular state space."""

from __future__ import annotations

from enum import Enum, IntEnum

HYDROGEN_MASS = 1.008


class Element(Enum):
    """The seven heavy elements; hydrogen is always implicit.

    Value order is the atom-class index used by the diffusion state space.
    """

    C = ("C", 12.011, (4,))
    N = ("N", 14.007, (3,))
    O = ("O", 15.999, (2,))
    S = ("S", 32.065, (2, 4, 6))
    F = ("F", 18.998, (1,))
    Cl = ("Cl", 35.453, (1,))
    Br = ("Br", 79.904, (1,))

    def __init__(self, symbol: str, mass: float, valences: tuple[int, ...]):
        self.symbol = symbol
        self.mass = mass
        self.valences = valences

    @property
    def index(self) -> int:
        return _ELEMENT_ORDER.index(self)

    @classmethod
    def from_index(cls, index: int) -> "Element":
        return _ELEMENT_ORDER[index]

    @classmethod
    def from_symbol(cls, symbol: str) -> "Element":
        """Look up an element by (case-sensitive) symbol.

        Raises:
            KeyError: unknown symbol.
        """
        return _BY_SYMBOL[symbol]

    def smallest_valence(self, used: int) -> int | None:
        """Smallest allowed valence that can hold ``used`` bond orders."""
        for v in self.valences:
            if v >= used:
                return v
        return None

    @property
    def aromatic_capable(self) -> bool:
        return self in (Element.C, Element.N, Element.O, Element.S)


_ELEMENT_ORDER: tuple[Element, ...] = tuple(Element)
_BY_SYMBOL = {e.symbol: e for e in Element}


class BondClass(IntEnum):
    """Edge states; NONE is a real diffusion state, never parsed."""

    NONE = 0
    SINGLE = 1
    DOUBLE = 2
    TRIPLE = 3
    AROMATIC = 4

    @property
    def order(self) -> float:
        return _BOND_ORDERS[self]


_BOND_ORDERS = {
    BondClass.NONE: 0.0,
    BondClass.SINGLE: 1.0,
    BondClass.DOUBLE: 2.0,
    BondClass.TRIPLE: 3.0,
    BondClass.AROMATIC: 1.5,
}

N_ATOM_CLASSES = len(_ELEMENT_ORDER)
N_BOND_CLASSES = len(BondClass)
