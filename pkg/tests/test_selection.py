"""Tests for the scikit-learn style loss-rank estimator."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lorp.exceptions import DegenerateFitError, ValidationError
from lorp.lossrank import variable_selection_score
from lorp.regressors import Dataset, knn_predict
from lorp.selection import (
    ALPHA_MODES,
    ESTIMATOR_FAMILIES,
    LossRankRegressor,
    candidate_hat,
    default_grid,
)


def smooth_sample(rng, n=60, noise=0.2):
    x = np.sort(rng.uniform(size=n)).reshape(-1, 1)
    y = np.sin(6.0 * x[:, 0]) + noise * rng.standard_normal(n)
    return x, y


class TestDefaultGrids:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.data = Dataset(x=rng.uniform(size=(50, 3)), y=rng.standard_normal(50))

    def test_neighbour_grids_respect_sample_size(self):
        assert default_grid("knn", self.data) == tuple(range(2, 21))
        small = Dataset(x=self.data.x[:8], y=self.data.y[:8])
        assert default_grid("knn", small) == tuple(range(2, 9))
        assert default_grid("knn_prime", small) == tuple(range(2, 8))

    def test_kernel_grid_spans_data_scale(self):
        grid = default_grid("kernel", self.data)
        assert len(grid) == 15
        assert all(w > 0 for w in grid)
        assert grid[0] < grid[-1] <= float(np.ptp(self.data.x)) * (1 + 1e-12)

    def test_spline_and_projection_grids(self):
        spline = default_grid("spline", self.data)
        assert len(spline) == 25 and spline[0] == pytest.approx(1e-6)
        assert default_grid("poly", self.data) == tuple(range(0, 9))
        assert default_grid("subset", self.data) == (1, 2, 3)

    def test_unknown_family(self):
        with pytest.raises(ValidationError):
            default_grid("tree", self.data)


class TestCandidateHat:
    def test_spline_needs_one_dimensional_x(self):
        rng = np.random.default_rng(1)
        data = Dataset(x=rng.uniform(size=(20, 2)), y=rng.standard_normal(20))
        with pytest.raises(ValidationError):
            candidate_hat("spline", 0.1, data)

    def test_families_produce_square_hats(self):
        rng = np.random.default_rng(2)
        data = Dataset(
            x=np.sort(rng.uniform(size=15)).reshape(-1, 1),
            y=rng.standard_normal(15),
        )
        for family, value in [
            ("knn", 3),
            ("knn_prime", 3),
            ("kernel", 0.2),
            ("spline", 1e-2),
            ("poly", 2),
            ("subset", 1),
        ]:
            assert candidate_hat(family, value, data).m.shape == (15, 15)


class TestSklearnProtocol:
    def test_get_set_clone(self):
        est = LossRankRegressor(family="poly", grid=(0, 1, 2), alpha_mode="caic")
        params = est.get_params()
        assert set(params) >= {
            "family", "grid", "alpha_mode", "alpha", "include_vn",
            "y_domain", "metric", "period",
        }
        est.set_params(alpha_mode="optimize")
        assert est.alpha_mode == "optimize"
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_clone_is_unfitted(self):
        rng = np.random.default_rng(3)
        x, y = smooth_sample(rng)
        est = LossRankRegressor(family="knn", grid=(3, 5)).fit(x, y)
        twin = clone(est)
        with pytest.raises(NotFittedError):
            twin.predict(x)

    def test_predict_before_fit(self):
        with pytest.raises(NotFittedError):
            LossRankRegressor().predict(np.zeros((2, 1)))

    def test_fit_returns_self_and_score_is_finite(self):
        rng = np.random.default_rng(4)
        x, y = smooth_sample(rng)
        est = LossRankRegressor(family="knn", grid=(3, 5, 9))
        assert est.fit(x, y) is est
        r2 = est.score(x, y)
        assert np.isfinite(r2) and r2 > 0.0


class TestFitBookkeeping:
    def test_candidate_records_and_minimum(self):
        rng = np.random.default_rng(5)
        x, y = smooth_sample(rng)
        est = LossRankRegressor(family="knn").fit(x, y)
        grid = default_grid("knn", est.data_)
        assert est.best_complexity_ in grid
        assert len(est.candidates_) == len(grid)
        scores = [c["score"] for c in est.candidates_]
        assert est.best_score_ == min(scores)
        assert est.candidates_[est.best_index_]["alpha"] > 0
        assert est.fitted_values_.shape == (60,)

    def test_tie_resolves_to_first_grid_entry(self):
        rng = np.random.default_rng(6)
        x, y = smooth_sample(rng, n=30, noise=0.3)
        est = LossRankRegressor(family="knn", grid=(4, 4, 2)).fit(x, y)
        assert est.candidates_[0]["score"] == est.candidates_[1]["score"]
        assert est.candidates_[0]["score"] < est.candidates_[2]["score"]
        assert est.best_index_ == 0

    def test_empty_grid_rejected(self):
        with pytest.raises(ValidationError):
            LossRankRegressor(family="knn", grid=()).fit(
                np.zeros((4, 1)), np.zeros(4)
            )

    def test_unknown_family_and_mode_caught_at_fit(self):
        x = np.linspace(0, 1, 10).reshape(-1, 1)
        y = np.sin(x[:, 0])
        with pytest.raises(ValidationError):
            LossRankRegressor(family="forest").fit(x, y)
        with pytest.raises(ValidationError):
            LossRankRegressor(alpha_mode="marginal").fit(x, y)


class TestAlphaModes:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.x = np.sort(rng.uniform(-1, 1, size=80)).reshape(-1, 1)
        self.y = (
            2.0
            - self.x[:, 0]
            + 0.8 * self.x[:, 0] ** 3
            + 0.1 * rng.standard_normal(80)
        )

    def test_projective_matches_numeric_optimum(self):
        numeric = LossRankRegressor(family="poly", grid=range(0, 5)).fit(self.x, self.y)
        closed = LossRankRegressor(
            family="poly", grid=range(0, 5), alpha_mode="projective"
        ).fit(self.x, self.y)
        assert closed.best_complexity_ == numeric.best_complexity_
        # d = 0 has no projective closed form; the rest agree with the
        # numeric optimum because every fit here leaves a real minimum
        assert closed.candidates_[0]["degenerate"]
        assert not numeric.candidates_[0]["degenerate"]
        for c_num, c_clo in zip(numeric.candidates_[1:], closed.candidates_[1:]):
            assert c_clo["score"] == pytest.approx(c_num["score"], rel=1e-5)

    def test_caic_candidate_scores(self):
        from lorp.criteria import corrected_aic

        est = LossRankRegressor(
            family="poly", grid=(1, 2, 3), alpha_mode="caic"
        ).fit(self.x, self.y)
        for entry in est.candidates_:
            d = int(entry["complexity"])
            phi = np.vander(self.x[:, 0], d, increasing=True)
            coef, *_ = np.linalg.lstsq(phi, self.y, rcond=None)
            rss = float(np.sum((self.y - phi @ coef) ** 2))
            assert entry["score"] == pytest.approx(corrected_aic(rss, 80, d), rel=1e-10)

    def test_fixed_mode_requires_alpha(self):
        est = LossRankRegressor(family="knn", grid=(3,), alpha_mode="fixed")
        with pytest.raises(ValidationError):
            est.fit(self.x, self.y)
        est = LossRankRegressor(family="knn", grid=(3,), alpha_mode="fixed", alpha=0.1)
        est.fit(self.x, self.y)
        assert est.candidates_[0]["alpha"] == 0.1

    def test_projective_mode_needs_projection_family(self):
        est = LossRankRegressor(family="knn", grid=(3,), alpha_mode="projective")
        with pytest.raises(ValidationError):
            est.fit(self.x, self.y)


class TestSubsetFamily:
    def setup_method(self):
        rng = np.random.default_rng(8)
        self.x = rng.uniform(-1, 1, size=(120, 4))
        self.y = 2.0 * self.x[:, 0] - self.x[:, 1] + 0.05 * rng.standard_normal(120)

    def test_recovers_true_prefix(self):
        est = LossRankRegressor(family="subset").fit(self.x, self.y)
        assert est.best_complexity_ == 2
        np.testing.assert_allclose(est.coef_, [2.0, -1.0], atol=0.02)

    def test_scores_match_direct_subset_evaluation(self):
        est = LossRankRegressor(family="subset", alpha_mode="projective").fit(
            self.x, self.y
        )
        data = est.data_
        for entry in est.candidates_:
            order = int(entry["complexity"])
            expect = variable_selection_score(range(1, order + 1), data)
            assert entry["score"] == pytest.approx(expect, rel=1e-12)

    def test_predict_uses_prefix_coefficients(self):
        est = LossRankRegressor(family="subset").fit(self.x, self.y)
        queries = self.x[:7]
        np.testing.assert_allclose(
            est.predict(queries), queries[:, :2] @ est.coef_, atol=1e-12
        )

    def test_predict_checks_feature_count(self):
        est = LossRankRegressor(family="subset").fit(self.x, self.y)
        with pytest.raises(ValidationError):
            est.predict(self.x[:, :2])


class TestPredictFamilies:
    def test_knn_predictions_are_out_of_sample_neighbour_means(self):
        rng = np.random.default_rng(9)
        x, y = smooth_sample(rng, n=40)
        est = LossRankRegressor(family="knn", grid=(4,)).fit(x, y)
        queries = rng.uniform(0.05, 0.95, size=(10, 1))
        got = est.predict(queries)
        expect = knn_predict(x, y, queries, 3)
        np.testing.assert_allclose(got, expect, atol=1e-12)

    def test_spline_and_kernel_predict_smoke(self):
        rng = np.random.default_rng(10)
        x, y = smooth_sample(rng, n=30)
        for family, grid in [("spline", (1e-3, 1e-1)), ("kernel", (0.05, 0.2))]:
            est = LossRankRegressor(family=family, grid=grid).fit(x, y)
            out = est.predict(np.array([[0.31], [0.62]]))
            assert out.shape == (2,) and np.all(np.isfinite(out))

    def test_poly_predict_matches_polynomial_fit(self):
        rng = np.random.default_rng(11)
        x = np.sort(rng.uniform(-1, 1, size=50)).reshape(-1, 1)
        y = 1.0 + 0.5 * x[:, 0] + 0.05 * rng.standard_normal(50)
        est = LossRankRegressor(family="poly", grid=(2,)).fit(x, y)
        coef = np.polynomial.polynomial.polyfit(x[:, 0], y, 1)
        queries = np.array([[-0.4], [0.3]])
        expect = coef[0] + coef[1] * queries[:, 0]
        np.testing.assert_allclose(est.predict(queries), expect, atol=1e-8)


class TestDiscreteDomain:
    def test_two_point_rank_selection(self):
        x = np.array([[1.0], [2.0]])
        y = np.array([1.0, 2.0])
        est = LossRankRegressor(
            family="poly", grid=(0, 1, 2), y_domain=(0, 1, 2)
        ).fit(x, y)
        assert [c["score"] for c in est.candidates_] == [8.0, 7.0, 9.0]
        assert est.best_complexity_ == 1
        assert est.best_score_ == 7.0


class TestDegenerateGrids:
    def test_all_degenerate_raises(self):
        # an interpolating candidate has no finite loss rank in
        # projective mode, so a grid of only that candidate fails
        x = np.array([[0.0], [1.0], [2.0]])
        y = np.array([1.0, 2.0, 5.0])
        est = LossRankRegressor(family="poly", grid=(0,), alpha_mode="projective")
        with pytest.raises(DegenerateFitError):
            est.fit(x, y)

    def test_module_constants(self):
        assert "knn" in ESTIMATOR_FAMILIES and "subset" in ESTIMATOR_FAMILIES
        assert set(ALPHA_MODES) == {"optimize", "fixed", "caic", "projective"}
