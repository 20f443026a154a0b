"""Tanimoto similarity and the DrugLike / DrugIndex screening metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from molguide.chem.fingerprint import Fingerprint, fingerprint_matrix
from molguide.utils.config import SIMILARITY_THRESHOLD
from molguide.utils.errors import DatasetError, FingerprintError, UndefinedMetricError

CHUNK_ROWS = 1024


def _check_compatible(a: Fingerprint, b: Fingerprint) -> None:
    if a.width != b.width or a.radius != b.radius:
        raise FingerprintError(
            f"incompatible fingerprints: radius/width {a.radius}/{a.width} vs {b.radius}/{b.width}"
        )


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """|a ∧ b| / |a ∨ b|, 1.0 when both are empty."""
    _check_compatible(a, b)
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = a.popcount + b.popcount - inter
    if union == 0:
        return 1.0
    return inter / union


def similarity_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise Tanimoto between rows of two bool matrices."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    inter = a @ b.T
    union = a.sum(axis=1)[:, None] + b.sum(axis=1)[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = np.where(union > 0, inter / np.where(union > 0, union, 1.0), 1.0)
    return sim


@dataclass(frozen=True)
class BestMatches:
    """Per-candidate best similarity and index of the nearest reference."""
    values: np.ndarray
    indices: np.ndarray


def best_similarities(refs: Sequence[Fingerprint], candidates: Sequence[Fingerprint]) -> BestMatches:
    """For each candidate, max Tanimoto over ``refs`` (first maximum wins).

    Raises:
        DatasetError: empty reference set.
        FingerprintError: incompatible fingerprints.
    """
    if not refs:
        raise DatasetError("reference fingerprint set is empty")
    if not candidates:
        return BestMatches(np.zeros(0), np.zeros(0, dtype=np.int64))
    _check_compatible(refs[0], candidates[0])
    ref_matrix = fingerprint_matrix(refs)
    cand_matrix = fingerprint_matrix(candidates)
    values = np.empty(len(candidates))
    indices = np.empty(len(candidates), dtype=np.int64)
    for start in range(0, len(candidates), CHUNK_ROWS):
        block = similarity_matrix(cand_matrix[start:start + CHUNK_ROWS], ref_matrix)
        best = np.argmax(block, axis=1)
        indices[start:start + len(block)] = best
        values[start:start + len(block)] = block[np.arange(len(block)), best]
    return BestMatches(values, indices)


def set_mol_sim(refs: Sequence[Fingerprint], b: Fingerprint) -> float:
    """Maximum similarity of ``b`` to any member of ``refs``."""
    return float(best_similarities(refs, [b]).values[0])


def drug_like_count(
    drugs: Sequence[Fingerprint],
    candidates: Sequence[Fingerprint],
    threshold: float = SIMILARITY_THRESHOLD,
) -> int:
    """Number of candidates whose best similarity to a drug is strictly above threshold."""
    if not candidates:
        raise DatasetError("candidate fingerprint set is empty")
    best = best_similarities(drugs, candidates).values
    return int(np.count_nonzero(best > threshold))


def drug_like(
    drugs: Sequence[Fingerprint],
    candidates: Sequence[Fingerprint],
    threshold: float = SIMILARITY_THRESHOLD,
) -> float:
    """Fraction of candidates passing the DrugLike screen.

    Raises:
        DatasetError: either collection is empty.
    """
    return drug_like_count(drugs, candidates, threshold) / len(candidates)


def drug_index_from_counts(
    generated_hits: int, generated_total: int, training_hits: int, training_total: int
) -> float:
    """DrugIndex percentage from raw screen counts.

    Cross-multiplied in integers so equal proportions give exactly 100.
    """
    if training_hits == 0:
        raise UndefinedMetricError(
            "DrugIndex undefined: no training molecule exceeds the similarity threshold"
        )
    return 100.0 * (generated_hits * training_total) / (training_hits * generated_total)


def drug_index(
    drugs: Sequence[Fingerprint],
    training: Sequence[Fingerprint],
    generated: Sequence[Fingerprint],
    threshold: float = SIMILARITY_THRESHOLD,
) -> float:
    """DrugLike(drugs, generated) / DrugLike(drugs, training) as a percentage.

    Raises:
        UndefinedMetricError: the training DrugLike proportion is zero.
        DatasetError: an input collection is empty.
    """
    training_hits = drug_like_count(drugs, training, threshold)
    generated_hits = drug_like_count(drugs, generated, threshold)
    return drug_index_from_counts(generated_hits, len(generated), training_hits, len(training))
