"""Generation quality: validity, uniqueness, novelty and filter pass rate."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Collection, Sequence

from molguide.chem.graph import MolecularGraph, check_valence
from molguide.chem.smiles import parse_smiles, write_smiles
from molguide.data.dataset import DatasetFilter
from molguide.utils.errors import MolGuideError


@dataclass(frozen=True)
class GenerationMetrics:
    total: int
    valid_count: int
    unique_count: int
    novel_count: int
    filter_count: int

    @staticmethod
    def _ratio(a: int, b: int) -> float:
        return a / b if b else 0.0

    @property
    def valid(self) -> float:
        return self._ratio(self.valid_count, self.total)

    @property
    def unique(self) -> float:
        return self._ratio(self.unique_count, self.valid_count)

    @property
    def novel(self) -> float:
        return self._ratio(self.novel_count, self.unique_count)

    @property
    def filters(self) -> float:
        return self._ratio(self.filter_count, self.valid_count)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(valid=self.valid, unique=self.unique, novel=self.novel, filters=self.filters)
        return out


def canonical_or_none(entry: str | MolecularGraph | None) -> tuple[str, MolecularGraph] | tuple[None, None]:
    """(canonical SMILES, graph) of a valid entry, else (None, None)."""
    if entry is None:
        return None, None
    try:
        g = parse_smiles(entry) if isinstance(entry, str) else entry
        if not check_valence(g).valid:
            return None, None
        return write_smiles(g), g
    except MolGuideError:
        return None, None


def generation_metrics(
    generated: Sequence[str | MolecularGraph | None],
    training: Collection[str],
    dataset_filter: DatasetFilter | None = None,
) -> GenerationMetrics:
    """Valid / unique / novel / filters over a generated batch.

    ``generated`` holds SMILES strings, graphs or None (an invalid sample);
    ``training`` holds canonical SMILES. unique is over valid molecules,
    novel over unique ones, filters over valid ones.
    """
    dataset_filter = dataset_filter or DatasetFilter()
    valid: list[str] = []
    passing = 0
    for entry in generated:
        smiles, g = canonical_or_none(entry)
        if smiles is None:
            continue
        valid.append(smiles)
        if dataset_filter.accepts(g):
            passing += 1
    unique = set(valid)
    novel = unique - set(training)
    return GenerationMetrics(
        total=len(generated),
        valid_count=len(valid),
        unique_count=len(unique),
        novel_count=len(novel),
        filter_count=passing,
    )
