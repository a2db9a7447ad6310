"""Estimator facade: fit-time complexity selection by loss rank."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.exceptions import NotFittedError

from .criteria import corrected_aic
from .exceptions import DegenerateFitError, ValidationError
from .lossrank import (
    discrete_rank_oracle,
    loss_rank,
    projective_loss_rank,
    subset_design,
    variable_selection_score,
)
from .regressors import (
    Dataset,
    basis_projection_matrix,
    canonical_predict,
    kernel_matrix,
    knn_matrix,
    knn_prime_matrix,
    polynomial_features,
    spline_matrix,
)
from .validation import as_matrix

ESTIMATOR_FAMILIES = ("knn", "knn_prime", "kernel", "spline", "poly", "subset")
PROJECTIVE_FAMILIES = ("poly", "subset")
ALPHA_MODES = ("optimize", "fixed", "caic", "projective")


def default_grid(family, data: Dataset):
    """Family-dependent default complexity grid for a dataset."""
    n, p = data.n, data.p
    if family == "knn":
        return tuple(range(2, min(20, n) + 1))
    if family == "knn_prime":
        return tuple(range(2, min(20, n - 1) + 1))
    if family == "kernel":
        span = float(np.ptp(data.x)) or 1.0
        return tuple(np.geomspace(span / n, span, 15))
    if family == "spline":
        return tuple(np.logspace(-6.0, 0.0, 25))
    if family == "poly":
        return tuple(range(0, min(9, n - 1)))
    if family == "subset":
        return tuple(range(1, p + 1))
    raise ValidationError(f"family must be one of {ESTIMATOR_FAMILIES}, got {family!r}")


def candidate_hat(family, value, data: Dataset, metric="euclidean", period=None):
    """Build the hat matrix of one candidate (family, complexity)."""
    if family == "knn":
        return knn_matrix(data.x, int(value), metric=metric, period=period)
    if family == "knn_prime":
        return knn_prime_matrix(data.x, int(value), metric=metric, period=period)
    if family == "kernel":
        return kernel_matrix(data.x, float(value))
    if family == "spline":
        if data.p != 1:
            raise ValidationError("spline family requires one-dimensional x")
        return spline_matrix(data.x[:, 0], float(value))
    if family == "poly":
        return basis_projection_matrix(polynomial_features(data.x, int(value)))
    if family == "subset":
        return basis_projection_matrix(subset_design(range(1, int(value) + 1), data))
    raise ValidationError(f"family must be one of {ESTIMATOR_FAMILIES}, got {family!r}")


class LossRankRegressor(BaseEstimator, RegressorMixin):
    """Pick the complexity of a regressor family by minimising loss rank.

    Parameters
    ----------
    family : str
        One of ``knn``, ``knn_prime``, ``kernel``, ``spline``, ``poly``
        (monomial basis projection) or ``subset`` (nested covariate
        prefixes with intercept-free least squares).
    grid : sequence or None
        Candidate complexities (k, kernel width, penalty, term count or
        subset size).  ``None`` picks a family-dependent default.
    alpha_mode : str
        How the regulariser is treated when scoring: ``optimize``
        (numeric minimisation, any family), ``fixed`` (requires
        ``alpha``), or the projection-only closed forms ``projective``
        and ``caic``.
    alpha : float or None
        The regulariser value for ``alpha_mode="fixed"``.
    include_vn : bool
        Add the unit-ball volume constant to reported scores.
    y_domain : sequence or None
        When given, responses live on this finite set and candidates are
        scored by the exact enumeration rank instead of the volume
        formula.
    metric, period :
        Neighbour metric options forwarded to the kNN builders.

    Attributes
    ----------
    best_complexity_ : selected grid value.
    best_score_ : its score (rank or loss-rank value).
    candidates_ : list of per-candidate dicts (complexity, score, alpha,
        degenerate flag).
    fitted_values_ : in-sample fit of the winning regressor.
    """

    def __init__(
        self,
        family="knn",
        grid=None,
        alpha_mode="optimize",
        alpha=None,
        include_vn=False,
        y_domain=None,
        metric="euclidean",
        period=None,
    ):
        self.family = family
        self.grid = grid
        self.alpha_mode = alpha_mode
        self.alpha = alpha
        self.include_vn = include_vn
        self.y_domain = y_domain
        self.metric = metric
        self.period = period

    # -- candidate scoring -------------------------------------------------

    def _score(self, data: Dataset, value, reg):
        if self.y_domain is not None:
            return float(discrete_rank_oracle(reg, np.asarray(self.y_domain, float), data)), None
        if self.alpha_mode == "optimize":
            score = loss_rank(reg, data.y, include_vn=self.include_vn)
            return score.value, score.alpha
        if self.alpha_mode == "fixed":
            if self.alpha is None:
                raise ValidationError("alpha_mode='fixed' requires alpha")
            score = loss_rank(reg, data.y, alpha=float(self.alpha), include_vn=self.include_vn)
            return score.value, score.alpha
        if self.family not in PROJECTIVE_FAMILIES:
            raise ValidationError(
                f"alpha_mode={self.alpha_mode!r} needs a projection family "
                f"({PROJECTIVE_FAMILIES}), got {self.family!r}"
            )
        d = int(reg.complexity)
        if self.alpha_mode == "projective":
            if d == 0:
                raise DegenerateFitError("zero-term projection has no closed form")
            if self.family == "subset":
                return variable_selection_score(range(1, int(value) + 1), data), None
            return projective_loss_rank(
                d, data.y, reg.m @ data.y, include_vn=self.include_vn
            ).value, None
        if self.alpha_mode == "caic":
            n = data.n
            resid = data.y - reg.m @ data.y
            rss = float(resid @ resid)
            if rss <= 0.0:
                raise DegenerateFitError("candidate interpolates y")
            return corrected_aic(rss, n, d), None
        raise ValidationError(
            f"alpha_mode must be one of {ALPHA_MODES}, got {self.alpha_mode!r}"
        )

    # -- sklearn API -------------------------------------------------------

    def fit(self, X, y):
        if self.family not in ESTIMATOR_FAMILIES:
            raise ValidationError(
                f"family must be one of {ESTIMATOR_FAMILIES}, got {self.family!r}"
            )
        if self.alpha_mode not in ALPHA_MODES:
            raise ValidationError(
                f"alpha_mode must be one of {ALPHA_MODES}, got {self.alpha_mode!r}"
            )
        data = Dataset(x=as_matrix(X, "X"), y=np.asarray(y, dtype=float))
        grid = tuple(self.grid) if self.grid is not None else default_grid(self.family, data)
        if not grid:
            raise ValidationError("candidate grid is empty")
        candidates = []
        hats = []
        for value in grid:
            reg = candidate_hat(self.family, value, data, metric=self.metric, period=self.period)
            hats.append(reg)
            entry = {"complexity": value, "score": None, "alpha": None, "degenerate": False}
            try:
                entry["score"], entry["alpha"] = self._score(data, value, reg)
            except DegenerateFitError as exc:
                entry["degenerate"] = True
                entry["detail"] = str(exc)
            candidates.append(entry)
        viable = [i for i, c in enumerate(candidates) if not c["degenerate"]]
        if not viable:
            raise DegenerateFitError(
                "every candidate on the grid has a degenerate loss rank"
            )
        best = min(viable, key=lambda i: candidates[i]["score"])
        self.data_ = data
        self.candidates_ = candidates
        self.best_index_ = best
        self.best_complexity_ = grid[best]
        self.best_score_ = candidates[best]["score"]
        self.fitted_values_ = hats[best].m @ data.y
        self.n_features_in_ = data.p
        if self.family == "subset":
            design = subset_design(range(1, int(grid[best]) + 1), data)
            self.coef_, *_ = np.linalg.lstsq(design, data.y, rcond=None)
        return self

    def _check_fitted(self):
        if not hasattr(self, "best_complexity_"):
            raise NotFittedError("this LossRankRegressor is not fitted yet")

    def predict(self, X):
        """Self-consistent prediction with the selected complexity."""
        self._check_fitted()
        queries = as_matrix(X, "X")
        if queries.shape[1] != self.n_features_in_:
            raise ValidationError(
                f"X has {queries.shape[1]} feature(s); fitted with {self.n_features_in_}"
            )
        if self.family == "subset":
            order = int(self.best_complexity_)
            return queries[:, :order] @ self.coef_
        value = self.best_complexity_
        out = np.empty(queries.shape[0])
        for i, row in enumerate(queries):
            if self.family == "poly":
                out[i] = canonical_predict(
                    "basis_projection",
                    int(value),
                    row,
                    self.data_,
                    features=lambda pts: polynomial_features(pts, int(value)),
                )
            else:
                out[i] = canonical_predict(
                    self.family,
                    value,
                    row,
                    self.data_,
                    metric=self.metric,
                    period=self.period,
                )
        return out
