"""Tests for circular fingerprints, Tanimoto similarity and the screening metrics."""

import numpy as np
import pytest

from molguide.chem.fingerprint import (
    Fingerprint,
    check_shape,
    fnv1a64,
    format_fingerprints,
    morgan_fingerprint,
    parse_fingerprints,
)
from molguide.chem.similarity import (
    best_similarities,
    drug_index,
    drug_index_from_counts,
    drug_like,
    drug_like_count,
    set_mol_sim,
    similarity_matrix,
    tanimoto,
)
from molguide.chem.smiles import parse_smiles
from molguide.utils.errors import (
    DatasetError,
    FingerprintError,
    InvalidMoleculeError,
    UndefinedMetricError,
)

from tests.conftest import DRUGLIKE_SMILES, IN_WINDOW_SMILES


def fp(*bits, width=64):
    return Fingerprint.from_indices(bits, radius=2, width=width)


class TestHash:
    """Test the FNV-1a 64-bit hash."""

    def test_known_vectors(self):
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C


class TestMorgan:
    """Test circular fingerprint generation."""

    def test_deterministic(self):
        g = parse_smiles("CC(=O)Nc1ccc(O)cc1")
        assert morgan_fingerprint(g) == morgan_fingerprint(g)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(3)
        for text in DRUGLIKE_SMILES + IN_WINDOW_SMILES:
            g = parse_smiles(text)
            expected = morgan_fingerprint(g, 2, 1024)
            for _ in range(5):
                assert morgan_fingerprint(g.permute(rng.permutation(g.n)), 2, 1024) == expected, text

    def test_radius_zero_only_atom_invariants(self):
        # all six benzene atoms share one invariant
        fp0 = morgan_fingerprint(parse_smiles("c1ccccc1"), radius=0, width=2048)
        assert fp0.popcount == 1

    def test_larger_radius_sets_superset(self):
        g = parse_smiles("CC(C)Cc1ccc(cc1)C(C)C(=O)O")
        small = morgan_fingerprint(g, 1, 2048)
        large = morgan_fingerprint(g, 3, 2048)
        assert np.all(large.bits[small.bits])

    def test_different_molecules_differ(self):
        a = morgan_fingerprint(parse_smiles("CCO"))
        b = morgan_fingerprint(parse_smiles("CCN"))
        assert a != b

    def test_invalid_molecule_rejected(self):
        with pytest.raises(InvalidMoleculeError):
            morgan_fingerprint(parse_smiles("C(C)(C)(C)(C)C"))

    @pytest.mark.parametrize("radius,width", [(-1, 2048), (2, 100), (2, 32)])
    def test_bad_shape(self, radius, width):
        with pytest.raises(FingerprintError):
            check_shape(radius, width)


class TestHexFormat:
    """Test the hex fingerprint codec and file format."""

    def test_hex_bit_order(self):
        assert fp(0).to_hex() == "0" * 15 + "1"
        assert fp(63).to_hex() == "8" + "0" * 15

    def test_hex_round_trip(self):
        original = morgan_fingerprint(parse_smiles("c1ccc2[nH]ccc2c1"), 2, 256)
        assert Fingerprint.from_hex(original.to_hex(), 2, 256) == original

    def test_hex_length_checked(self):
        with pytest.raises(FingerprintError):
            Fingerprint.from_hex("ff", 2, 64)

    def test_file_round_trip(self):
        fps = [morgan_fingerprint(parse_smiles(s), 2, 512) for s in ("CCO", "c1ccccc1")]
        text = "# extra header\n" + format_fingerprints(fps, ["ethanol", "benzene"])
        parsed = parse_fingerprints(text)
        assert [label for _, label in parsed] == ["ethanol", "benzene"]
        assert [f for f, _ in parsed] == fps

    def test_mixed_widths_rejected(self):
        with pytest.raises(FingerprintError):
            format_fingerprints([fp(1), fp(1, width=128)], ["a", "b"])


class TestTanimoto:
    """Test Tanimoto similarity."""

    def test_half(self):
        assert tanimoto(fp(1, 2, 3), fp(2, 3, 4)) == 0.5

    def test_identical(self):
        assert tanimoto(fp(5, 9), fp(5, 9)) == 1.0

    def test_disjoint(self):
        assert tanimoto(fp(1), fp(2)) == 0.0

    def test_both_empty(self):
        assert tanimoto(fp(), fp()) == 1.0

    def test_width_mismatch(self):
        with pytest.raises(FingerprintError):
            tanimoto(fp(1), fp(1, width=128))

    def test_matrix_matches_pairwise(self):
        a = [fp(1, 2, 3), fp(), fp(7)]
        b = [fp(2, 3, 4), fp(7, 8)]
        matrix = similarity_matrix(np.stack([x.bits for x in a]), np.stack([x.bits for x in b]))
        for i, x in enumerate(a):
            for j, y in enumerate(b):
                assert matrix[i, j] == pytest.approx(tanimoto(x, y))


class TestScreening:
    """Test best-match search, DrugLike and DrugIndex."""

    @pytest.fixture
    def drugs(self):
        return [fp(0, 1, 2, 3), fp(10, 11, 12, 13)]

    @pytest.fixture
    def candidates(self):
        # three candidates above 0.5 against some drug, seven at or below
        return [
            fp(0, 1, 2, 3),          # 1.0
            fp(10, 11, 12),          # 0.75
            fp(0, 1, 2, 3, 4),       # 0.8
            fp(0, 1, 20, 21),        # 2/6 = 0.333
            fp(10, 11, 30, 31),      # 0.333
            fp(0, 1, 2, 40, 41),     # 3/6 = 0.5, not strictly above
            fp(50),
            fp(51, 52),
            fp(),
            fp(12, 60, 61, 62),      # 1/7
        ]

    def test_best_similarities(self, drugs, candidates):
        best = best_similarities(drugs, candidates)
        assert best.values[0] == 1.0
        assert best.indices[1] == 1
        assert best.values[5] == 0.5

    def test_best_match_ties_pick_first(self):
        best = best_similarities([fp(1), fp(1)], [fp(1)])
        assert best.indices[0] == 0

    def test_set_mol_sim(self, drugs):
        assert set_mol_sim(drugs, fp(10, 11, 12)) == 0.75

    def test_drug_like_fixture(self, drugs, candidates):
        assert drug_like(drugs, candidates) == 0.3
        assert drug_like_count(drugs, candidates) == 3

    def test_drug_like_empty_candidates(self, drugs):
        with pytest.raises(DatasetError):
            drug_like(drugs, [])

    def test_empty_references(self, candidates):
        with pytest.raises(DatasetError):
            best_similarities([], candidates)

    def test_drug_index_of_training_against_itself(self, drugs, candidates):
        assert drug_index(drugs, candidates, candidates) == 100.0

    def test_drug_index_from_counts(self):
        assert drug_index_from_counts(3, 10, 3, 10) == 100.0
        assert drug_index_from_counts(1, 100, 2, 100) == 50.0

    def test_drug_index_undefined(self, drugs):
        with pytest.raises(UndefinedMetricError):
            drug_index(drugs, [fp(50)], [fp(0, 1, 2, 3)])
