import numpy as np
import pytest

from ontospace.errors import DataError
from ontospace.intensional import (
    load_concept_vectors,
    read_concept_vector_file,
    unp_concept_vectors,
    write_concept_vector_file,
)


def write_vectors(path, rows, dim):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(rows)} {dim}\n")
        for cid, vec in rows:
            fh.write(f"{cid} " + " ".join(repr(float(x)) for x in vec) + "\n")


class TestVectorFileParsing:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(40)
        ids = np.arange(5)
        mat = rng.normal(size=(5, 3))
        path = tmp_path / "v.txt"
        write_concept_vector_file(str(path), ids, mat)
        count, dim, got_ids, got = read_concept_vector_file(str(path))
        assert (count, dim) == (5, 3)
        np.testing.assert_array_equal(got_ids, ids)
        np.testing.assert_array_equal(got, mat)

    def test_header_count_mismatch(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("3 2\n0 1.0 2.0\n")
        with pytest.raises(DataError, match="header count"):
            read_concept_vector_file(str(path))

    def test_ids_must_ascend(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("2 2\n1 1.0 2.0\n0 3.0 4.0\n")
        with pytest.raises(DataError, match="ascending"):
            read_concept_vector_file(str(path))

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("1 2\n0 nan 2.0\n")
        with pytest.raises(DataError, match="non-finite"):
            read_concept_vector_file(str(path))

    def test_wrong_field_count(self, tmp_path):
        path = tmp_path / "v.txt"
        path.write_text("1 3\n0 1.0 2.0\n")
        with pytest.raises(DataError, match="expected id plus 3 floats"):
            read_concept_vector_file(str(path))


class TestLoadConceptVectors:
    def test_exact_dim_passthrough(self, tmp_path):
        rng = np.random.default_rng(41)
        mat = rng.normal(size=(4, 6))
        path = tmp_path / "v.txt"
        write_vectors(str(path), list(enumerate(mat)), 6)
        out = load_concept_vectors(str(path), n_concepts=4, target_dim=6, seed=1)
        np.testing.assert_array_equal(out, mat)

    def test_reduction_is_deterministic(self, tmp_path):
        rng = np.random.default_rng(42)
        mat = rng.normal(size=(30, 16))
        path = tmp_path / "v.txt"
        write_vectors(str(path), list(enumerate(mat)), 16)
        a = load_concept_vectors(str(path), n_concepts=30, target_dim=5, seed=1)
        b = load_concept_vectors(str(path), n_concepts=30, target_dim=5, seed=1)
        assert a.shape == (30, 5)
        np.testing.assert_array_equal(a, b)

    def test_reduction_preserves_pairwise_structure(self, tmp_path):
        # project a rank-3 point cloud from 16 dims to 3: distances survive
        rng = np.random.default_rng(43)
        basis = rng.normal(size=(3, 16))
        coords = rng.normal(size=(25, 3))
        mat = coords @ basis
        path = tmp_path / "v.txt"
        write_vectors(str(path), list(enumerate(mat)), 16)
        out = load_concept_vectors(str(path), n_concepts=25, target_dim=3, seed=1)
        orig = np.linalg.norm(mat[:, None] - mat[None, :], axis=2)
        red = np.linalg.norm(out[:, None] - out[None, :], axis=2)
        np.testing.assert_allclose(red, orig, atol=1e-8)

    def test_missing_rows_match_unp_init(self, tmp_path):
        rng = np.random.default_rng(44)
        present = [0, 2, 3]
        mat = rng.normal(size=(3, 4))
        path = tmp_path / "v.txt"
        write_vectors(str(path), list(zip(present, mat)), 4)
        out = load_concept_vectors(str(path), n_concepts=5, target_dim=4, seed=9)
        fallback = unp_concept_vectors(5, 4, seed=9)
        np.testing.assert_array_equal(out[1], fallback[1])
        np.testing.assert_array_equal(out[4], fallback[4])
        np.testing.assert_array_equal(out[present], mat)

    def test_narrow_file_rejected(self, tmp_path):
        path = tmp_path / "v.txt"
        write_vectors(str(path), [(0, [1.0, 2.0])], 2)
        with pytest.raises(DataError, match="below target"):
            load_concept_vectors(str(path), n_concepts=1, target_dim=4, seed=0)

    def test_id_out_of_range(self, tmp_path):
        path = tmp_path / "v.txt"
        write_vectors(str(path), [(7, [1.0, 2.0])], 2)
        with pytest.raises(DataError, match="out of range"):
            load_concept_vectors(str(path), n_concepts=3, target_dim=2, seed=0)
