"""Morgan-style circular fingerprints with a 64-bit FNV-1a hash.

Round 0 hashes each atom's (element, heavy degree, H count, in-ring)
invariant; every later round re-hashes the atom's code with the sorted
(bond class, neighbor code) list. Every code of every round is folded into
the bit vector modulo its width.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from molguide.chem.graph import MolecularGraph, require_valid
from molguide.chem.rings import perceive_rings
from molguide.utils.errors import FingerprintError

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def hash_ints(values: Sequence[int]) -> int:
    """FNV-1a over the little-endian uint64 encoding of ``values``."""
    return fnv1a64(struct.pack(f"<{len(values)}Q", *(v & MASK64 for v in values)))


def check_shape(radius: int, width: int) -> None:
    if radius < 0:
        raise FingerprintError(f"radius must be >= 0, got {radius}")
    if width < 64 or width & (width - 1):
        raise FingerprintError(f"width must be a power of two >= 64, got {width}")


# ─── Data Model ─────────────────────────────────────────────────────


@dataclass(frozen=True, eq=False)
class Fingerprint:
    """Fixed-width bit vector with cached popcount."""
    bits: np.ndarray
    radius: int
    width: int

    def __post_init__(self) -> None:
        bits = np.array(self.bits, dtype=bool, copy=True).reshape(-1)
        if bits.shape[0] != self.width:
            raise FingerprintError(f"bit vector length {bits.shape[0]} != width {self.width}")
        bits.flags.writeable = False
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "popcount", int(np.count_nonzero(bits)))

    @classmethod
    def from_indices(cls, indices: Iterable[int], radius: int = 2, width: int = 2048) -> "Fingerprint":
        bits = np.zeros(width, dtype=bool)
        bits[list(indices)] = True
        return cls(bits, radius, width)

    def on_bits(self) -> list[int]:
        return np.flatnonzero(self.bits).tolist()

    def to_hex(self) -> str:
        """width/4 hex chars, most significant bit (index width-1) first."""
        return np.packbits(self.bits[::-1]).tobytes().hex()

    @classmethod
    def from_hex(cls, text: str, radius: int, width: int) -> "Fingerprint":
        if len(text) != width // 4:
            raise FingerprintError(f"expected {width // 4} hex chars, got {len(text)}")
        try:
            raw = np.frombuffer(bytes.fromhex(text), dtype=np.uint8)
        except ValueError as e:
            raise FingerprintError(f"invalid hex fingerprint: {e}") from e
        return cls(np.unpackbits(raw)[::-1].astype(bool), radius, width)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return (
            self.radius == other.radius
            and self.width == other.width
            and np.array_equal(self.bits, other.bits)
        )

    def __hash__(self) -> int:
        return hash((self.radius, self.width, self.bits.tobytes()))


# ─── Generation ─────────────────────────────────────────────────────


def atom_invariant_codes(g: MolecularGraph) -> list[int]:
    """Round-0 codes of every atom."""
    h = g.implicit_h
    ring = perceive_rings(g).atom_in_ring
    return [
        hash_ints((g.atoms[i].index, g.degree(i), h[i], int(ring[i])))
        for i in range(g.n)
    ]


def morgan_fingerprint(g: MolecularGraph, radius: int = 2, width: int = 2048) -> Fingerprint:
    """Circular fingerprint of a valid molecule.

    Raises:
        InvalidMoleculeError: the graph fails the valence check.
        FingerprintError: bad radius or width.
    """
    check_shape(radius, width)
    require_valid(g)
    bits = np.zeros(width, dtype=bool)
    codes = atom_invariant_codes(g)
    for code in codes:
        bits[code % width] = True
    for _ in range(radius):
        updated = []
        for i in range(g.n):
            env = sorted((int(g.bonds[i, j]), codes[j]) for j in g.neighbors(i))
            flat = [codes[i]] + [v for pair in env for v in pair]
            updated.append(hash_ints(flat))
        codes = updated
        for code in codes:
            bits[code % width] = True
    return Fingerprint(bits, radius, width)


def fingerprint_matrix(fps: Sequence[Fingerprint]) -> np.ndarray:
    """Stack fingerprints into an (N, width) bool matrix.

    Raises:
        FingerprintError: mixed widths or radii.
    """
    if not fps:
        return np.zeros((0, 0), dtype=bool)
    radius, width = fps[0].radius, fps[0].width
    for fp in fps:
        if fp.radius != radius or fp.width != width:
            raise FingerprintError("fingerprints differ in radius or width")
    return np.stack([fp.bits for fp in fps])


# ─── Hex file format ────────────────────────────────────────────────


def format_fingerprints(fps: Sequence[Fingerprint], labels: Sequence[str]) -> str:
    """Body of a fingerprint file: a radius/width line then ``hex<TAB>label``."""
    if not fps:
        return ""
    radius, width = fps[0].radius, fps[0].width
    lines = [f"# radius={radius} width={width}"]
    for fp, label in zip(fps, labels):
        if fp.radius != radius or fp.width != width:
            raise FingerprintError("fingerprints differ in radius or width")
        lines.append(f"{fp.to_hex()}\t{label}")
    return "\n".join(lines) + "\n"


def parse_fingerprints(text: str) -> list[tuple[Fingerprint, str]]:
    """Inverse of format_fingerprints (other ``#`` lines are skipped)."""
    radius = width = None
    out = []
    for line in text.splitlines():
        if line.startswith("# radius="):
            fields = dict(part.split("=") for part in line[2:].split())
            radius, width = int(fields["radius"]), int(fields["width"])
            continue
        if not line.strip() or line.startswith("#"):
            continue
        if radius is None:
            raise FingerprintError("missing radius/width header line")
        hex_part, _, label = line.partition("\t")
        out.append((Fingerprint.from_hex(hex_part, radius, width), label))
    return out
