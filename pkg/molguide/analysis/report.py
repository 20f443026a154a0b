"""Degradation report: which drug clusters each molecule source reaches."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from molguide.analysis.clustering import ClusterModel, assign_clusters
from molguide.analysis.substructure import has_fused_ring_56
from molguide.chem.fingerprint import Fingerprint, morgan_fingerprint
from molguide.chem.graph import MolecularGraph
from molguide.chem.similarity import best_similarities
from molguide.utils.config import (
    CLUSTER_RADIUS,
    CLUSTER_WIDTH,
    SCREEN_RADIUS,
    SCREEN_WIDTH,
    SIMILARITY_THRESHOLD,
)
from molguide.utils.logger import get_logger

log = get_logger(__name__)


@dataclass
class DegradationReport:
    """Per-source cluster counts and fused-ring proportions.

    Attributes:
        counts: cluster × source table of DrugLike-passing molecules.
        screened: DrugLike-passing molecules per source (the column sums).
        totals: molecules per source.
        proportions: fraction of each source's molecules with a fused 5/6 ring pair.
    """
    counts: pd.DataFrame
    screened: dict[str, int] = field(default_factory=dict)
    totals: dict[str, int] = field(default_factory=dict)
    proportions: dict[str, float] = field(default_factory=dict)

    def proportion_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"source": list(self.proportions), "proportion": list(self.proportions.values())}
        )

    def summary_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "source": list(self.totals),
            "molecules": [self.totals[s] for s in self.totals],
            "drug_like": [self.screened[s] for s in self.totals],
            "clusters_hit": [int((self.counts[s] > 0).sum()) for s in self.totals],
        })


def fingerprints(molecules: Sequence[MolecularGraph], radius: int, width: int) -> list[Fingerprint]:
    return [morgan_fingerprint(m, radius, width) for m in molecules]


def cluster_table(
    sources: Mapping[str, Sequence[MolecularGraph]],
    model: ClusterModel,
    actives: Sequence[MolecularGraph],
    screen_radius: int = SCREEN_RADIUS,
    screen_width: int = SCREEN_WIDTH,
    cluster_radius: int = CLUSTER_RADIUS,
    cluster_width: int = CLUSTER_WIDTH,
    threshold: float = SIMILARITY_THRESHOLD,
) -> DegradationReport:
    """Screen every source against the actives, then tabulate cluster hits.

    A molecule passes when its best screening-fingerprint similarity to an
    active is strictly above ``threshold``; passing molecules take the
    cluster of their nearest active by clustering fingerprint.
    """
    screen_refs = fingerprints(actives, screen_radius, screen_width)
    cluster_refs = fingerprints(actives, cluster_radius, cluster_width)
    columns: dict[str, np.ndarray] = {}
    report = DegradationReport(pd.DataFrame())
    for name, molecules in sources.items():
        molecules = list(molecules)
        report.totals[name] = len(molecules)
        counts = np.zeros(model.k, dtype=np.int64)
        if molecules:
            best = best_similarities(screen_refs, fingerprints(molecules, screen_radius, screen_width))
            passing = [m for m, v in zip(molecules, best.values) if v > threshold]
            if passing:
                labels = assign_clusters(
                    model, cluster_refs, fingerprints(passing, cluster_radius, cluster_width)
                )
                counts = np.bincount(labels, minlength=model.k)
            report.proportions[name] = sum(has_fused_ring_56(m) for m in molecules) / len(molecules)
        else:
            report.proportions[name] = 0.0
        report.screened[name] = int(counts.sum())
        columns[name] = counts
        log.info("Source %s: %d molecules, %d DrugLike, %d clusters hit",
                 name, len(molecules), report.screened[name], int((counts > 0).sum()))
    report.counts = pd.DataFrame(columns, index=pd.RangeIndex(model.k, name="cluster"))
    return report
