import numpy as np
import pytest

from descomp import fit_one_hot, fit_pca, fit_pipeline, fit_standardizer
from descomp.data import AttributeMeta, Dataset

from conftest import make_blobs


class TestOneHot:
    def test_one_of_c_encoding(self, mixed_dataset):
        mapping = fit_one_hot(mixed_dataset)
        row = mapping.transform(np.array([1.0, 0.7]))  # green
        assert row.tolist() == [0.0, 1.0, 0.0, 0.7]

    def test_identity_for_numeric_only(self):
        ds = Dataset(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([0, 1]),
                     (AttributeMeta("a", "numeric"), AttributeMeta("b", "numeric")), 2)
        mapping = fit_one_hot(ds)
        assert mapping.output_dim == 2
        assert np.array_equal(mapping.transform(ds.features), ds.features)

    def test_output_dimensionality(self):
        meta = (AttributeMeta("n1", "nominal", ("a", "b")),
                AttributeMeta("n2", "nominal", ("a", "b", "c")),
                AttributeMeta("x", "numeric"))
        ds = Dataset(np.array([[0.0, 2.0, 1.5]]), np.array([0]), meta, 2)
        assert fit_one_hot(ds).output_dim == 2 + 3 + 1

    def test_out_of_range_category(self, mixed_dataset):
        mapping = fit_one_hot(mixed_dataset)
        with pytest.raises(ValueError, match="outside its"):
            mapping.transform(np.array([5.0, 0.0]))


class TestStandardizer:
    def test_population_std(self):
        std = fit_standardizer(np.array([[1.0], [2.0], [3.0]]))
        assert std.means[0] == pytest.approx(2.0)
        assert std.stds[0] == pytest.approx(np.sqrt(2.0 / 3.0))
        out = std.transform(np.array([[1.0], [2.0], [3.0]]))
        np.testing.assert_allclose(out[:, 0], [-1.22474487, 0.0, 1.22474487])

    def test_constant_column_dropped_and_recorded(self):
        std = fit_standardizer(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]]))
        assert std.dropped == (0,)
        assert std.transform(np.array([[5.0, 2.0]])).shape == (1, 1)

    def test_already_standardized_is_identity(self):
        x = np.array([[-1.0], [0.0], [1.0]]) * np.sqrt(1.5)
        std = fit_standardizer(x)
        np.testing.assert_allclose(std.transform(x), x, atol=1e-9)

    def test_single_row_rejected(self):
        with pytest.raises(ValueError, match="at least 2 rows"):
            fit_standardizer(np.array([[1.0, 2.0]]))

    def test_transformed_training_moments(self):
        rng = np.random.default_rng(5)
        x = rng.normal(3.0, 2.5, size=(40, 4))
        std = fit_standardizer(x)
        out = std.transform(x)
        assert np.all(np.abs(out.mean(axis=0)) < 1e-9)
        np.testing.assert_allclose(out.std(axis=0), 1.0, atol=1e-9)


class TestPca:
    def test_rank_one_line(self):
        x = np.array([[t, 2.0 * t] for t in (-2.0, -1.0, 0.0, 1.0, 2.0)])
        x = fit_standardizer(x).transform(x)
        pca = fit_pca(x, 0.95)
        assert pca.n_components == 1
        assert pca.retained_variance_fraction == pytest.approx(1.0)

    def test_isotropic_keeps_everything(self):
        # orthogonal design: standardized covariance is the identity,
        # cumulative explained variance is k/3 per component
        x = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
        pca = fit_pca(x, 0.95)
        assert pca.n_components == 3

    def test_planted_two_dimensional_structure(self):
        # two strong directions in 5-D; oracle = direct covariance eigendecomposition
        rng = np.random.default_rng(41)
        n = 400
        basis = np.linalg.qr(rng.normal(size=(5, 5)))[0]
        latent = rng.normal(size=(n, 2)) * np.array([9.0, 6.0])
        noise = rng.normal(size=(n, 5)) * 0.05
        x = latent @ basis[:, :2].T + noise
        x = fit_standardizer(x).transform(x)
        pca = fit_pca(x, 0.95)
        assert pca.n_components == 2
        cov = np.cov(x, rowvar=False, bias=True)
        eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1]
        oracle_fraction = eigvals[:2].sum() / eigvals.sum()
        assert pca.retained_variance_fraction == pytest.approx(oracle_fraction, abs=1e-9)
        assert oracle_fraction >= 0.95

    def test_orthonormal_rows(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(30, 6))
        pca = fit_pca(x, 1.0)
        gram = pca.components @ pca.components.T
        np.testing.assert_allclose(gram, np.eye(pca.n_components), atol=1e-8)

    def test_eigenvalues_non_increasing(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(25, 5)) * np.array([3.0, 2.0, 1.0, 0.5, 0.1])
        pca = fit_pca(x, 1.0)
        assert np.all(np.diff(pca.eigenvalues) <= 1e-12)

    def test_gram_route_matches_covariance_route(self):
        # d > n triggers the Gram-matrix path; spectra must agree
        rng = np.random.default_rng(4)
        x = rng.normal(size=(6, 10))
        pca = fit_pca(x, 0.9)
        cov = np.cov(x, rowvar=False, bias=True)
        eigvals = np.sort(np.linalg.eigvalsh(cov))[::-1][:len(pca.eigenvalues)]
        np.testing.assert_allclose(pca.eigenvalues, eigvals, atol=1e-9)
        gram = pca.components @ pca.components.T
        np.testing.assert_allclose(gram, np.eye(pca.n_components), atol=1e-8)

    def test_deterministic_sign_convention(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(40, 4))
        pca = fit_pca(x, 1.0)
        for row in pca.components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_projected_variances_equal_eigenvalues(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(60, 5)) @ np.diag([3.0, 2.0, 1.5, 1.0, 0.2])
        x = fit_standardizer(x).transform(x)
        pca = fit_pca(x, 1.0)
        projected = pca.transform(x)
        np.testing.assert_allclose(projected.var(axis=0),
                                   pca.eigenvalues[:pca.n_components], atol=1e-6)

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            fit_pca(np.eye(3), 0.0)
        with pytest.raises(ValueError):
            fit_pca(np.eye(3), 1.5)


class TestPipeline:
    def test_training_set_output_is_centered(self, blobs):
        pipeline = fit_pipeline(blobs, 0.95)
        out = pipeline.apply(blobs.features)
        assert out.shape[1] == pipeline.output_dim
        assert np.all(np.abs(out.mean(axis=0)) < 1e-9)

    def test_identity_on_uncorrelated_full_rank(self):
        # uncorrelated unit-variance columns: threshold 1.0 keeps all
        # components and the projection is exactly the identity
        x = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
        ds = Dataset(x, np.array([0, 1, 0, 1]),
                     (AttributeMeta("a", "numeric"), AttributeMeta("b", "numeric")), 2)
        pipeline = fit_pipeline(ds, 1.0)
        np.testing.assert_array_equal(pipeline.apply(x), x)

    def test_single_row_through_pipeline(self, blobs):
        pipeline = fit_pipeline(blobs, 0.95)
        row = pipeline.apply(blobs.features[0])
        assert row.ndim == 1 and row.size == pipeline.output_dim

    def test_stage_order_one_hot_then_standardize_then_project(self, mixed_dataset):
        pipeline = fit_pipeline(mixed_dataset, 1.0)
        manual = pipeline.pca.transform(
            pipeline.standardizer.transform(
                pipeline.one_hot.transform(mixed_dataset.features)))
        np.testing.assert_array_equal(pipeline.apply(mixed_dataset.features), manual)

    def test_dimensionality_mismatch(self, blobs):
        pipeline = fit_pipeline(blobs, 0.95)
        with pytest.raises(ValueError, match="dimensionality mismatch"):
            pipeline.apply(np.zeros((3, 7)))

    def test_no_test_leakage(self, blobs):
        pipeline = fit_pipeline(blobs, 0.95)
        other = make_blobs(seed=99)
        again = fit_pipeline(blobs, 0.95)
        np.testing.assert_array_equal(pipeline.pca.components, again.pca.components)
        # applying to unseen data does not change fitted parameters
        pipeline.apply(other.features)
        np.testing.assert_array_equal(pipeline.standardizer.means,
                                      again.standardizer.means)
