"""Tests for fingerprint clustering, fused-ring detection and the degradation report."""

from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from molguide.analysis.clustering import assign_clusters, kmeans_fingerprints, tanimoto_distance
from molguide.analysis.report import cluster_table, fingerprints
from molguide.analysis.substructure import has_fused_ring_56, structure_proportion
from molguide.chem.fingerprint import Fingerprint
from molguide.chem.smiles import parse_smiles
from molguide.utils.errors import DatasetError

from tests.conftest import DRUGLIKE_SMILES, IN_WINDOW_SMILES


def fp(*bits):
    return Fingerprint.from_indices(bits, radius=2, width=128)


def gf2_rank(rows: list[np.ndarray]) -> int:
    if not rows:
        return 0
    m = np.array(rows, dtype=np.uint8)
    rank = 0
    for col in range(m.shape[1]):
        pivot = next((r for r in range(rank, m.shape[0]) if m[r, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for r in range(m.shape[0]):
            if r != rank and m[r, col]:
                m[r] ^= m[rank]
        rank += 1
    return rank


def brute_force_fused(adjacency: np.ndarray) -> bool:
    """Every simple cycle up to 6, kept when no set of shorter cycles sums to it."""
    graph = nx.from_numpy_array(adjacency.astype(int))
    edge_index = {frozenset(e): k for k, e in enumerate(graph.edges())}
    cycles = []
    for cycle in nx.simple_cycles(graph, length_bound=6):
        bonds = {frozenset((cycle[i], cycle[(i + 1) % len(cycle)])) for i in range(len(cycle))}
        vector = np.zeros(len(edge_index), dtype=np.uint8)
        vector[[edge_index[b] for b in bonds]] = 1
        cycles.append((len(cycle), bonds, vector))

    def relevant(length, vector):
        shorter = [v for k, _, v in cycles if k < length]
        return gf2_rank(shorter + [vector]) > gf2_rank(shorter)

    rings = [bonds for k, bonds, v in cycles if k in (5, 6) and relevant(k, v)]
    return any(a & b for a, b in combinations(rings, 2))


@pytest.fixture
def two_groups():
    return [fp(*range(10))] * 3 + [fp(*range(100, 110))] * 3


class TestDistance:
    """Test the generalized Tanimoto distance."""

    def test_identical_and_disjoint(self):
        x = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        d = tanimoto_distance(x, x)
        assert d[0, 0] == 0.0
        assert d[0, 1] == 1.0

    def test_zero_vectors(self):
        z = np.zeros((1, 4))
        assert tanimoto_distance(z, z)[0, 0] == 0.0

    def test_real_valued_centroid(self):
        d = tanimoto_distance(np.array([[1.0, 1.0]]), np.array([[0.5, 0.5]]))
        # inner 1, norms 2 and 0.5
        assert d[0, 0] == pytest.approx(1 - 1 / 1.5)


class TestKMeans:
    """Test k-means over fingerprints."""

    def test_separates_groups(self, two_groups):
        model = kmeans_fingerprints(two_groups, k=2, seed=0)
        a, b = model.assignments[:3], model.assignments[3:]
        assert len(set(a.tolist())) == 1
        assert len(set(b.tolist())) == 1
        assert a[0] != b[0]
        assert model.cluster_sizes().tolist() == [3, 3]

    def test_objective_never_increases(self):
        rng = np.random.default_rng(0)
        fps = [fp(*rng.choice(128, size=12, replace=False).tolist()) for _ in range(40)]
        model = kmeans_fingerprints(fps, k=5, seed=1)
        history = model.objective_history
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))
        assert model.n_iter >= 1

    def test_deterministic(self, two_groups):
        a = kmeans_fingerprints(two_groups, k=3, seed=4)
        b = kmeans_fingerprints(two_groups, k=3, seed=4)
        assert np.array_equal(a.assignments, b.assignments)
        assert np.array_equal(a.centroids, b.centroids)

    def test_too_few_points(self, two_groups):
        with pytest.raises(DatasetError):
            kmeans_fingerprints(two_groups, k=7)


class TestAssign:
    """Test nearest-active cluster assignment."""

    def test_candidates_follow_nearest_active(self, two_groups):
        model = kmeans_fingerprints(two_groups, k=2, seed=0)
        labels = assign_clusters(model, two_groups, [fp(*range(100, 111)), fp(*range(2, 10))])
        assert labels[0] == model.assignments[3]
        assert labels[1] == model.assignments[0]

    def test_no_candidates(self, two_groups):
        model = kmeans_fingerprints(two_groups, k=2)
        assert assign_clusters(model, two_groups, []).tolist() == []

    def test_actives_must_match(self, two_groups):
        model = kmeans_fingerprints(two_groups, k=2)
        with pytest.raises(DatasetError):
            assign_clusters(model, two_groups[:2], [fp(1)])
        with pytest.raises(DatasetError):
            assign_clusters(model, [], [fp(1)])


class TestFusedRings:
    """Fused 5/6 ring detection."""

    @pytest.mark.parametrize("smiles,expected", [
        ("c1ccc2[nH]ccc2c1", True),      # indole
        ("c1ccc2ccccc2c1", True),        # naphthalene
        ("C1CC2CCC1C2", True),           # norbornane: bridged 5-rings share a bond
        ("c1ccccc1", False),
        ("c1ccc(cc1)-c1ccccc1", False),  # biphenyl
        ("C1CCC2(C1)CCCCC2", False),     # spiro: rings share only an atom
        ("C1CCC2CCCCCC2C1", False),      # 6/7 fused
        ("C1CC2CC2C1", False),           # bicyclo[3.1.0]hexane: the 6-cycle is an envelope
        ("C1CC2CC12", False),            # bicyclo[2.1.0]pentane: the 5-cycle is an envelope
        ("C1CC2CCCC2C1", True),          # bicyclo[4.3.0]nonane
    ])
    def test_known_molecules(self, smiles, expected):
        assert has_fused_ring_56(parse_smiles(smiles)) is expected

    @pytest.mark.parametrize("seed", range(8))
    def test_random_graphs_match_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        n = 9
        upper = np.triu(rng.random((n, n)) < 0.3, k=1)
        adj = upper | upper.T
        assert has_fused_ring_56(adj) == brute_force_fused(adj)

    def test_proportion(self):
        mols = [parse_smiles(s) for s in DRUGLIKE_SMILES + IN_WINDOW_SMILES]
        # caffeine, naphthalene, indole, propranolol
        assert structure_proportion(mols) == pytest.approx(4 / 15)

    def test_proportion_empty(self):
        with pytest.raises(DatasetError):
            structure_proportion([])


class TestDegradationReport:
    """Test the cluster table over molecule sources."""

    @pytest.fixture
    def actives(self):
        return [parse_smiles(s) for s in DRUGLIKE_SMILES + IN_WINDOW_SMILES]

    def test_actives_against_themselves(self, actives):
        model = kmeans_fingerprints(fingerprints(actives, 10, 2048), k=3, seed=0)
        report = cluster_table({"drugs": actives, "none": []}, model, actives)
        assert report.counts.shape == (3, 2)
        assert report.counts["drugs"].tolist() == model.cluster_sizes().tolist()
        assert report.screened == {"drugs": len(actives), "none": 0}
        assert report.counts["none"].sum() == 0
        assert report.proportions["none"] == 0.0
        assert report.proportions["drugs"] == pytest.approx(4 / 15)

    def test_frames(self, actives):
        model = kmeans_fingerprints(fingerprints(actives, 10, 2048), k=2, seed=0)
        report = cluster_table({"x": actives[:5]}, model, actives)
        summary = report.summary_frame()
        assert summary.columns.tolist() == ["source", "molecules", "drug_like", "clusters_hit"]
        assert summary["molecules"].tolist() == [5]
        assert report.proportion_frame()["source"].tolist() == ["x"]
