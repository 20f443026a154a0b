"""Dataset ingestion, filtering and summary statistics."""

from __future__ import annotations

import io
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from molguide.chem.elements import BondClass, Element
from molguide.chem.graph import MolecularGraph, molecular_weight, require_valid
from molguide.chem.rings import perceive_rings
from molguide.chem.smiles import parse_smiles
from molguide.core.diffusion import Marginals, estimate_marginals, node_count_histogram
from molguide.utils.config import MAX_NODES, MAX_RING_SIZE, WEIGHT_RANGE
from molguide.utils.errors import DatasetError, MolGuideError
from molguide.utils.logger import get_logger

log = get_logger(__name__)

TRUE_LABELS = {"1", "true", "yes", "active", "a"}
FALSE_LABELS = {"0", "false", "no", "inactive", "i"}


# ─── Ingestion ─────────────────────────────────────────────────────


@dataclass
class IngestResult:
    """Parsed molecules with their source SMILES, labels and the rejected rows."""
    molecules: list[MolecularGraph] = field(default_factory=list)
    smiles: list[str] = field(default_factory=list)
    labels: list[int] | None = None
    rejected: list[tuple[int, str]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.molecules)


def _read_table(path: str | os.PathLike) -> pd.DataFrame:
    """CSV with header; whole-line ``#`` comments are skipped (``#`` is a SMILES bond)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    body = "\n".join(line for line in text.splitlines() if not line.startswith("#"))
    if not body.strip():
        raise DatasetError(f"{path} is empty")
    try:
        return pd.read_csv(io.StringIO(body), dtype=str, keep_default_na=False)
    except pd.errors.ParserError as e:
        raise DatasetError(f"cannot parse CSV {path}: {e}") from e


def coerce_label(value) -> int | None:
    text = str(value).strip().lower()
    if text in TRUE_LABELS:
        return 1
    if text in FALSE_LABELS:
        return 0
    try:
        return int(float(text) != 0.0)
    except ValueError:
        return None


def parse_valid(text: str) -> MolecularGraph:
    """parse_smiles followed by the valence check."""
    g = parse_smiles(text)
    require_valid(g)
    return g


def ingest_csv(
    path: str | os.PathLike,
    smiles_column: str = "smiles",
    label_column: str | None = None,
) -> IngestResult:
    """Read molecules (and optional binary labels) from a CSV file.

    Rows whose SMILES does not parse into a valid molecule, or whose label
    cannot be read as 0/1, are logged and skipped.

    Raises:
        DatasetError: unreadable or empty file, missing column.
    """
    table = _read_table(path)
    for column in (smiles_column, label_column):
        if column is not None and column not in table.columns:
            raise DatasetError(f"column {column!r} not found in {path} (have {list(table.columns)})")
    if table.empty:
        raise DatasetError(f"{path} has a header but no rows")

    result = IngestResult(labels=[] if label_column else None)
    for row, record in enumerate(table.to_dict("records"), start=1):
        text = record[smiles_column].strip()
        label = None
        if label_column:
            label = coerce_label(record[label_column])
            if label is None:
                result.rejected.append((row, "BadLabel"))
                log.warning("Row %d: unreadable label %r", row, record[label_column])
                continue
        try:
            g = parse_valid(text)
        except MolGuideError as e:
            result.rejected.append((row, e.error_class))
            log.warning("Row %d: rejected %r (%s: %s)", row, text, e.error_class, e)
            continue
        result.molecules.append(g)
        result.smiles.append(text)
        if label_column:
            result.labels.append(label)

    log.info("Ingested %s: %d molecules, %d rejected", path, len(result), len(result.rejected))
    return result


def read_smiles_lines(path: str | os.PathLike) -> list[str]:
    """First token of every non-comment line of a SMILES file."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DatasetError(f"cannot read {path}: {e}") from e
    return [line.split()[0] for line in lines if line.strip() and not line.startswith("#")]


def read_molecules(path: str | os.PathLike, smiles_column: str = "smiles") -> IngestResult:
    """Molecules from a CSV (by column) or a SMILES line file; invalid entries skipped."""
    if str(path).lower().endswith(".csv"):
        return ingest_csv(path, smiles_column)
    entries = read_smiles_lines(path)
    if not entries:
        raise DatasetError(f"{path} contains no SMILES")
    result = IngestResult()
    for row, text in enumerate(entries, start=1):
        try:
            g = parse_valid(text)
        except MolGuideError as e:
            result.rejected.append((row, e.error_class))
            log.debug("Line %d: rejected %r (%s)", row, text, e.error_class)
            continue
        result.molecules.append(g)
        result.smiles.append(text)
    log.info("Read %s: %d molecules, %d rejected", path, len(result), len(result.rejected))
    return result


# ─── Filtering ─────────────────────────────────────────────────────


@dataclass(frozen=True)
class DatasetFilter:
    """Weight window (implicit H included), ring-size cap and element whitelist.

    Charges never reach a MolecularGraph (the parser rejects them), so the
    charge-free rule holds by construction.
    """
    min_weight: float = WEIGHT_RANGE[0]
    max_weight: float = WEIGHT_RANGE[1]
    max_ring_size: int = MAX_RING_SIZE
    allowed: frozenset = frozenset(Element)
    charge_free: bool = True

    def __post_init__(self) -> None:
        if self.min_weight > self.max_weight:
            raise DatasetError("filter weight range is reversed")
        if self.max_ring_size < 3:
            raise DatasetError("max_ring_size must be >= 3")

    def reject_reason(self, g: MolecularGraph) -> str | None:
        """Name of the first failed rule, or None if the molecule passes."""
        if any(a not in self.allowed for a in g.atoms):
            return "element"
        weight = molecular_weight(g)
        if weight < self.min_weight:
            return "weight_low"
        if weight > self.max_weight:
            return "weight_high"
        if any(size > self.max_ring_size for size in perceive_rings(g).sizes()):
            return "ring_size"
        return None

    def accepts(self, g: MolecularGraph) -> bool:
        return self.reject_reason(g) is None


@dataclass
class FilterResult:
    kept: list[MolecularGraph]
    indices: list[int]
    tally: Counter

    @property
    def rejected(self) -> int:
        return sum(self.tally.values())


def filter_dataset(molecules: Sequence[MolecularGraph], f: DatasetFilter | None = None) -> FilterResult:
    """Keep molecules passing every rule; tally rejections by rule."""
    f = f or DatasetFilter()
    kept, indices, tally = [], [], Counter()
    for i, g in enumerate(molecules):
        reason = f.reject_reason(g)
        if reason is None:
            kept.append(g)
            indices.append(i)
        else:
            tally[reason] += 1
    log.info("Filter kept %d of %d (%s)", len(kept), len(molecules), dict(tally) or "no rejections")
    return FilterResult(kept, indices, tally)


# ─── Statistics ────────────────────────────────────────────────────


@dataclass
class DatasetStats:
    n_molecules: int
    node_histogram: np.ndarray
    marginals: Marginals
    element_counts: dict[str, int]
    bond_counts: dict[str, int]
    filter_tally: dict[str, int]
    filter_kept: int


def dataset_stats(molecules: Sequence[MolecularGraph], n_max: int = MAX_NODES) -> DatasetStats:
    """Marginals, size histogram, element and bond-class counts, filter tally.

    Raises:
        DatasetError: empty dataset.
    """
    if not molecules:
        raise DatasetError("dataset is empty")
    n_max = max(n_max, max(g.n for g in molecules))
    elements: Counter = Counter()
    bonds: Counter = Counter()
    for g in molecules:
        elements.update(a.symbol for a in g.atoms)
        bonds.update(b.name for _, _, b in g.edges())
    filtered = filter_dataset(molecules)
    return DatasetStats(
        n_molecules=len(molecules),
        node_histogram=node_count_histogram(molecules, n_max),
        marginals=estimate_marginals(molecules, n_max),
        element_counts={e.symbol: elements.get(e.symbol, 0) for e in Element},
        bond_counts={b.name: bonds.get(b.name, 0) for b in BondClass if b != BondClass.NONE},
        filter_tally=dict(filtered.tally),
        filter_kept=len(filtered.kept),
    )


def limit_size(molecules: Iterable[MolecularGraph], n_max: int) -> list[MolecularGraph]:
    """Molecules with at most n_max heavy atoms."""
    return [g for g in molecules if g.n <= n_max]
