"""variety: covariance, eigen kernel, projection, row variance, selection."""

from __future__ import annotations

import numpy as np
import pytest

from conftest import make_record
from instrefine.gateway import EmbeddingMatrix
from instrefine.records import Dataset
from instrefine.variety import (
    VarietyConfig,
    covariance,
    project,
    row_variances,
    select_top_fraction,
    top_k_eigen,
    variety_curate,
    variety_curate_detailed,
)
from oracles import jacobi_eigh

RNG = np.random.default_rng(20240917)

# The worked 3-point instance used across several contracts below.
HAND_X = np.array([[2.0, 0.0], [0.0, 2.0], [-2.0, -2.0]])
SQRT2 = np.sqrt(2.0)


def random_symmetric(d: int) -> np.ndarray:
    M = RNG.normal(size=(d, d))
    return (M + M.T) / 2.0


class TestCovariance:
    def test_hand_computation(self):
        X = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(covariance(X), [[1.0, 0.0], [0.0, 0.0]], atol=0)

    def test_identical_rows_zero_matrix(self):
        X = np.tile([3.0, -1.0, 2.0], (5, 1))
        np.testing.assert_allclose(covariance(X), np.zeros((3, 3)), atol=1e-15)

    def test_permutation_invariance(self):
        X = RNG.normal(size=(12, 5))
        perm = RNG.permutation(12)
        np.testing.assert_allclose(covariance(X), covariance(X[perm]), atol=1e-12)

    def test_symmetry_within_tolerance(self):
        C = covariance(RNG.normal(size=(40, 9)))
        assert np.abs(C - C.T).max() <= 1e-12

    def test_single_row_rejected(self):
        with pytest.raises(ValueError, match="at least 2 rows"):
            covariance(np.ones((1, 4)))

    def test_accepts_embedding_matrix(self):
        m = EmbeddingMatrix(row_ids=("a", "b"), values=np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert covariance(m).shape == (2, 2)


class TestTopKEigen:
    def test_identity_matrix(self):
        pair = top_k_eigen(np.eye(3), 2)
        np.testing.assert_allclose(pair.eigenvalues, [1.0, 1.0])

    def test_analytic_2x2(self):
        pair = top_k_eigen(np.array([[4.0, 2.0], [2.0, 4.0]]), 2)
        np.testing.assert_allclose(pair.eigenvalues, [6.0, 2.0], atol=1e-12)
        np.testing.assert_allclose(
            pair.eigenvectors[:, 0], [1 / SQRT2, 1 / SQRT2], atol=1e-12
        )
        np.testing.assert_allclose(
            pair.eigenvectors[:, 1], [1 / SQRT2, -1 / SQRT2], atol=1e-12
        )

    def test_residual_against_full_decomposition(self):
        C = random_symmetric(6)
        pair = top_k_eigen(C, 3)
        bound = 1e-10 * max(1.0, np.linalg.norm(C, "fro"))
        residual = np.linalg.norm(
            C @ pair.eigenvectors - pair.eigenvectors * pair.eigenvalues, axis=0
        )
        assert residual.max() <= bound
        oracle_values, _ = jacobi_eigh(C)
        np.testing.assert_allclose(pair.eigenvalues, oracle_values[:3], atol=1e-11)

    def test_orthonormal_columns(self):
        pair = top_k_eigen(random_symmetric(8), 5)
        gram = pair.eigenvectors.T @ pair.eigenvectors
        np.testing.assert_allclose(gram, np.eye(5), atol=1e-10)

    def test_sign_convention(self):
        for _ in range(20):
            pair = top_k_eigen(random_symmetric(7), 7)
            for j in range(7):
                column = pair.eigenvectors[:, j]
                assert column[int(np.argmax(np.abs(column)))] > 0

    def test_non_symmetric_rejected(self):
        C = np.array([[1.0, 2.0], [0.0, 1.0]])
        with pytest.raises(ValueError, match="symmetric"):
            top_k_eigen(C, 1)

    def test_k_out_of_range(self):
        with pytest.raises(ValueError):
            top_k_eigen(np.eye(3), 4)
        with pytest.raises(ValueError):
            top_k_eigen(np.eye(3), 0)


class TestProject:
    def test_hand_example(self):
        pair = top_k_eigen(covariance(HAND_X), 2)
        R = project(HAND_X, pair)
        expected = np.array(
            [[SQRT2, SQRT2], [SQRT2, -SQRT2], [-2 * SQRT2, 0.0]]
        )
        np.testing.assert_allclose(R, expected, atol=1e-12)

    def test_full_basis_preserves_distances(self):
        X = RNG.normal(size=(15, 6))
        pair = top_k_eigen(covariance(X), 6)
        R = project(X, pair)
        centered = X - X.mean(axis=0)
        for i in range(0, 15, 3):
            for j in range(i + 1, 15, 4):
                original = np.linalg.norm(centered[i] - centered[j])
                reduced = np.linalg.norm(R[i] - R[j])
                assert abs(original - reduced) <= 1e-8 * max(1.0, original)

    def test_column_variance_equals_eigenvalue(self):
        X = RNG.normal(size=(30, 7)) * [1, 2, 3, 4, 5, 6, 7]
        pair = top_k_eigen(covariance(X), 4)
        R = project(X, pair)
        column_variance = R.var(axis=0, ddof=1)
        np.testing.assert_allclose(
            column_variance, pair.eigenvalues, rtol=1e-8
        )

    def test_identical_rows_project_to_zero(self):
        X = np.tile([1.0, 2.0, 3.0], (4, 1))
        pair = top_k_eigen(covariance(X), 2)
        np.testing.assert_allclose(project(X, pair), np.zeros((4, 2)), atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        pair = top_k_eigen(np.eye(3), 2)
        with pytest.raises(ValueError):
            project(np.ones((4, 2)), pair)

    def test_embedding_matrix_input_keeps_row_ids(self):
        m = EmbeddingMatrix(row_ids=("a", "b", "c"), values=HAND_X)
        reduced = project(m, top_k_eigen(covariance(m), 2))
        assert reduced.row_ids == ("a", "b", "c")
        assert reduced.values.shape == (3, 2)


class TestRowVariances:
    def test_hand_example(self):
        R = np.array([[SQRT2, SQRT2], [SQRT2, -SQRT2], [-2 * SQRT2, 0.0]])
        np.testing.assert_allclose(row_variances(R), [0.0, 2.0, 2.0], atol=1e-12)

    def test_constant_row_is_zero(self):
        assert row_variances(np.array([[5.0, 5.0, 5.0]]))[0] == 0.0

    def test_scaling_law(self):
        R = RNG.normal(size=(6, 4))
        np.testing.assert_allclose(
            row_variances(3.0 * R), 9.0 * row_variances(R), rtol=1e-12
        )

    def test_single_dimension_rejected(self):
        with pytest.raises(ValueError, match="at least 2"):
            row_variances(np.ones((3, 1)))


class TestSelectTopFraction:
    def test_tie_broken_by_ascending_id(self):
        assert select_top_fraction([0.0, 2.0, 2.0], ["a", "b", "c"], 0.2) == ["b"]

    def test_fraction_one_selects_all(self):
        selected = select_top_fraction([1.0, 3.0, 2.0], ["a", "b", "c"], 1.0)
        assert set(selected) == {"a", "b", "c"}

    def test_full_scale_cardinality(self):
        scores = RNG.normal(size=60000).tolist()
        ids = [f"{i:05d}" for i in range(60000)]
        assert len(select_top_fraction(scores, ids, 0.2)) == 12000

    def test_ceiling_cardinality(self):
        assert len(select_top_fraction([1.0] * 7, list("abcdefg"), 0.3)) == 3  # ceil(2.1)

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            select_top_fraction([1.0], ["a"], 0.0)


def embeddings_for(dataset: Dataset, rows: np.ndarray) -> EmbeddingMatrix:
    return EmbeddingMatrix(row_ids=dataset.ids(), values=rows)


def tiny_dataset(n: int) -> Dataset:
    return Dataset.from_records((make_record(i) for i in range(n)), "code")


class TestVarietyCurate:
    def test_hand_example_end_to_end(self):
        d = tiny_dataset(3)
        curated = variety_curate(
            d, embeddings_for(d, HAND_X), VarietyConfig(reduced_dim=2, keep_fraction=0.2)
        )
        assert curated.ids() == ("1",)  # the row-variance tie breaks to the lower id

    def test_single_record_rejected(self):
        d = tiny_dataset(1)
        with pytest.raises(ValueError, match="at least 2 rows"):
            variety_curate(
                d,
                embeddings_for(d, np.ones((1, 4))),
                VarietyConfig(reduced_dim=2, keep_fraction=1.0),
            )

    def test_identical_embeddings_fall_back_to_id_order(self):
        d = tiny_dataset(5)
        rows = np.tile([0.5, -0.5, 1.0, 2.0], (5, 1))
        result = variety_curate_detailed(
            d, embeddings_for(d, rows), VarietyConfig(reduced_dim=2, keep_fraction=0.4)
        )
        assert all(s == 0.0 for s in result.scores)
        assert result.curated.ids() == ("0", "1")

    def test_permutation_equivariance(self):
        d = tiny_dataset(10)
        rows = RNG.normal(size=(10, 6))
        config = VarietyConfig(reduced_dim=3, keep_fraction=0.3)
        base = variety_curate_detailed(d, embeddings_for(d, rows), config)

        perm = RNG.permutation(10)
        shuffled = EmbeddingMatrix(
            row_ids=tuple(d.ids()[i] for i in perm), values=rows[perm]
        )
        again = variety_curate_detailed(d, shuffled, config)
        assert base.selected_ids == again.selected_ids
        np.testing.assert_allclose(base.scores, again.scores, rtol=1e-12)

    def test_selection_preserves_dataset_order(self):
        d = tiny_dataset(8)
        rows = RNG.normal(size=(8, 5))
        curated = variety_curate(
            d, embeddings_for(d, rows), VarietyConfig(reduced_dim=3, keep_fraction=0.5)
        )
        positions = [d.ids().index(rid) for rid in curated.ids()]
        assert positions == sorted(positions)

    def test_reduced_dim_clamped_to_embedding_dim(self):
        d = tiny_dataset(6)
        rows = RNG.normal(size=(6, 3))
        result = variety_curate_detailed(
            d, embeddings_for(d, rows), VarietyConfig(reduced_dim=32, keep_fraction=0.5)
        )
        assert result.reduced.dims == 3

    def test_id_mismatch_rejected(self):
        d = tiny_dataset(3)
        wrong = EmbeddingMatrix(
            row_ids=("x", "y", "z"), values=RNG.normal(size=(3, 4))
        )
        with pytest.raises(ValueError, match="cover exactly"):
            variety_curate(d, wrong, VarietyConfig())

    def test_whitening_changes_scores(self):
        d = tiny_dataset(12)
        rows = RNG.normal(size=(12, 5)) * [10, 5, 2, 1, 0.5]
        plain = variety_curate_detailed(
            d, embeddings_for(d, rows), VarietyConfig(reduced_dim=4, keep_fraction=0.5)
        )
        whitened = variety_curate_detailed(
            d,
            embeddings_for(d, rows),
            VarietyConfig(reduced_dim=4, keep_fraction=0.5, whiten=True),
        )
        assert not np.allclose(plain.scores, whitened.scores)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            VarietyConfig(reduced_dim=1)
        with pytest.raises(ValueError):
            VarietyConfig(keep_fraction=1.5)
