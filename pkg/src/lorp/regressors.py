"""Builders for y-linear regressors and their hat matrices.

A y-linear regressor on a fixed design produces fitted values
``yhat = M @ y``.  This module constructs ``M`` for the supported
families (k-nearest-neighbour averaging, its self-excluding variant,
Gaussian kernel smoothing, basis projection, smoothing splines) and
implements the self-consistent off-data prediction rule that treats a
new point as if its response were already part of the sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from .exceptions import (
    DegeneratePredictionError,
    RankDeficientError,
    SolveError,
    ValidationError,
)
from .validation import (
    as_matrix,
    as_vector,
    check_xy,
    require_positive_float,
    require_positive_int,
)

FAMILIES = ("knn", "knn_prime", "kernel", "basis_projection", "spline")


@dataclass
class Dataset:
    """A regression sample: design ``x`` of shape (n, p), response ``y`` of shape (n,)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x, self.y = check_xy(self.x, self.y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


@dataclass
class RegressorMatrix:
    """Hat matrix ``m`` tagged with the family and complexity that built it."""

    m: np.ndarray
    family: str
    complexity: float

    def __post_init__(self):
        self.m = as_matrix(self.m, "hat matrix")
        if self.m.shape[0] != self.m.shape[1]:
            raise ValidationError(f"hat matrix must be square, got {self.m.shape}")
        if self.family not in FAMILIES:
            raise ValidationError(
                f"unknown family {self.family!r}; expected one of {FAMILIES}"
            )

    @property
    def n(self) -> int:
        return self.m.shape[0]


def hat_matrix(m):
    """Accept a RegressorMatrix or a raw square array; return the ndarray."""
    if isinstance(m, RegressorMatrix):
        return m.m
    arr = as_matrix(m, "hat matrix")
    if arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"hat matrix must be square, got {arr.shape}")
    return arr


# ---------------------------------------------------------------------------
# distance helpers
# ---------------------------------------------------------------------------


def _points(x):
    arr = as_matrix(x, "x")
    return arr


def _pairwise_distances(x, metric, period):
    """Distance matrix for neighbour ranking.

    ``metric`` is "euclidean" or "circular"; the circular metric wraps
    one-dimensional coordinates with the given period.
    """
    pts = _points(x)
    if metric == "euclidean":
        return cdist(pts, pts)
    if metric == "circular":
        if pts.shape[1] != 1:
            raise ValidationError("circular metric requires one-dimensional x")
        if period is None:
            raise ValidationError("circular metric requires an explicit period")
        period = require_positive_float(period, "period")
        diff = np.abs(pts[:, 0][:, None] - pts[:, 0][None, :])
        diff = np.mod(diff, period)
        return np.minimum(diff, period - diff)
    raise ValidationError(f"unknown metric {metric!r}")


def _neighbour_order(dist):
    # stable sort breaks distance ties in favour of the smaller index
    return np.argsort(dist, axis=1, kind="stable")


# ---------------------------------------------------------------------------
# family builders
# ---------------------------------------------------------------------------


def knn_matrix(x, k, metric="euclidean", period=None) -> RegressorMatrix:
    """Hat matrix of k-nearest-neighbour averaging.

    Each row places weight exactly ``1/k`` on the k points nearest to
    ``x_i`` (the point itself included; distance ties broken towards the
    smaller index).
    """
    pts = _points(x)
    n = pts.shape[0]
    k = require_positive_int(k, "k")
    if k > n:
        raise ValidationError(f"k={k} exceeds the sample size n={n}")
    order = _neighbour_order(_pairwise_distances(pts, metric, period))
    m = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    m[rows, order[:, :k].ravel()] = 1.0 / k
    return RegressorMatrix(m=m, family="knn", complexity=k)


def knn_prime_matrix(x, k, metric="euclidean", period=None) -> RegressorMatrix:
    """kNN averaging that skips each point's single closest neighbour.

    On-data the closest neighbour of ``x_i`` is ``x_i`` itself, so the
    diagonal of the result is exactly zero (for distinct inputs) and each
    row averages the k nearest *other* points.
    """
    pts = _points(x)
    n = pts.shape[0]
    k = require_positive_int(k, "k")
    if k > n - 1:
        raise ValidationError(f"k={k} exceeds the number of candidate neighbours n-1={n - 1}")
    order = _neighbour_order(_pairwise_distances(pts, metric, period))
    m = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    m[rows, order[:, 1 : k + 1].ravel()] = 1.0 / k
    return RegressorMatrix(m=m, family="knn_prime", complexity=k)


def kernel_matrix(x, width) -> RegressorMatrix:
    """Row-normalised Gaussian kernel smoother.

    Weights ``exp(-||x_i - x_j||^2 / (2 width^2))`` are normalised to sum
    to one per row; the self-weight keeps every row sum positive, so the
    matrix is defined for any ``width > 0``.
    """
    pts = _points(x)
    width = require_positive_float(width, "width")
    sq = cdist(pts, pts, metric="sqeuclidean")
    with np.errstate(under="ignore"):
        w = np.exp(-sq / (2.0 * width * width))
    m = w / w.sum(axis=1, keepdims=True)
    return RegressorMatrix(m=m, family="kernel", complexity=width)


def polynomial_features(x, n_terms):
    """Monomial design ``1, t, ..., t**(n_terms-1)`` for one-dimensional x."""
    pts = _points(x)
    if pts.shape[1] != 1:
        raise ValidationError("polynomial features require one-dimensional x")
    n_terms = require_positive_int(n_terms, "n_terms", minimum=0)
    t = pts[:, 0]
    return np.vander(t, N=n_terms, increasing=True) if n_terms else np.empty((len(t), 0))


def basis_projection_matrix(features, rank_rtol=1e-10) -> RegressorMatrix:
    """Orthogonal projection onto the column span of a feature matrix.

    Built from a pivoted QR factorisation so the result is exactly
    symmetric in floating point.  A zero-column feature matrix yields the
    zero regressor.
    """
    phi = as_matrix(features, "features")
    n, d = phi.shape
    if d == 0:
        return RegressorMatrix(m=np.zeros((n, n)), family="basis_projection", complexity=0)
    if d > n:
        raise ValidationError(f"more basis columns ({d}) than observations ({n})")
    q, r, piv = scipy.linalg.qr(phi, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0:
        raise RankDeficientError("feature matrix is zero", column=int(piv[0]))
    bad = np.nonzero(diag <= rank_rtol * diag[0])[0]
    if bad.size:
        raise RankDeficientError(
            f"feature column {int(piv[bad[0]])} is linearly dependent on the others",
            column=int(piv[bad[0]]),
        )
    m = q @ q.T
    m = 0.5 * (m + m.T)
    return RegressorMatrix(m=m, family="basis_projection", complexity=d)


# ---------------------------------------------------------------------------
# natural cubic smoothing splines
# ---------------------------------------------------------------------------


def _check_knots(x):
    t = as_vector(np.asarray(x, dtype=float).reshape(-1), "knots")
    if t.size < 3:
        raise ValidationError("splines need at least three knots")
    order = np.argsort(t, kind="stable")
    sorted_t = t[order]
    if np.any(np.diff(sorted_t) == 0):
        raise ValidationError("spline knots must be distinct (tied x values)")
    return t, order, sorted_t


def natural_spline_basis(knots, t=None):
    """Natural cubic spline basis evaluated at ``t`` (default: the knots).

    With sorted knots ``x_1 < ... < x_n`` the columns are ``1``, ``t`` and
    ``d_k(t) - d_{n-1}(t)`` for ``k = 1..n-2``, where
    ``d_k(t) = ((t - x_k)_+^3 - (t - x_n)_+^3) / (x_n - x_k)``.
    The span is linear outside the boundary knots.
    """
    _, _, xs = _check_knots(knots)
    pts = xs if t is None else as_vector(np.asarray(t, dtype=float).reshape(-1), "t")
    n = xs.size
    cube_last = np.maximum(pts - xs[-1], 0.0) ** 3
    basis = np.empty((pts.size, n))
    basis[:, 0] = 1.0
    basis[:, 1] = pts
    for k in range(n - 1):
        dk = (np.maximum(pts - xs[k], 0.0) ** 3 - cube_last) / (xs[-1] - xs[k])
        if k < n - 2:
            basis[:, k + 2] = dk
        else:
            basis[:, 2:] -= dk[:, None]
    return basis


def _spline_second_derivatives(xs, t):
    """Second derivatives of the natural basis columns at points ``t``."""
    n = xs.size
    ramp_last = np.maximum(t - xs[-1], 0.0)
    d2 = np.zeros((n, t.size))
    dlast = 6.0 * (np.maximum(t - xs[-2], 0.0) - ramp_last) / (xs[-1] - xs[-2])
    for k in range(n - 2):
        dk = 6.0 * (np.maximum(t - xs[k], 0.0) - ramp_last) / (xs[-1] - xs[k])
        d2[k + 2] = dk - dlast
    return d2


def natural_spline_penalty(knots):
    """Gram matrix of second derivatives, integrated between the boundary knots.

    The integrand is piecewise quadratic, so per-interval Simpson weights
    give the exact integral.
    """
    _, _, xs = _check_knots(knots)
    mids = 0.5 * (xs[:-1] + xs[1:])
    at_knots = _spline_second_derivatives(xs, xs)
    at_mids = _spline_second_derivatives(xs, mids)
    h = np.diff(xs)
    left = at_knots[:, :-1]
    right = at_knots[:, 1:]
    omega = (
        np.einsum("k,ik,jk->ij", h / 6.0, left, left)
        + np.einsum("k,ik,jk->ij", 4.0 * h / 6.0, at_mids, at_mids)
        + np.einsum("k,ik,jk->ij", h / 6.0, right, right)
    )
    return 0.5 * (omega + omega.T)


def spline_matrix(x, lam) -> RegressorMatrix:
    """Smoothing-spline hat matrix ``N (N'N + lam * Omega)^-1 N'``.

    Computed through a QR factorisation of the basis so the eigenvalues
    stay inside (0, 1] even when the raw truncated-power basis is badly
    conditioned.  Rows and columns follow the input order of ``x``.
    """
    lam = require_positive_float(lam, "lam", allow_zero=True)
    t, order, xs = _check_knots(x)
    n = xs.size
    basis = natural_spline_basis(xs)
    omega = natural_spline_penalty(xs)
    q, r = scipy.linalg.qr(basis, mode="economic")
    diag = np.abs(np.diag(r))
    if np.any(diag <= 1e-13 * diag.max()):
        raise SolveError("spline basis is numerically singular for these knots")
    # G = R^-T Omega R^-1, the penalty in the orthonormalised basis
    z = scipy.linalg.solve_triangular(r.T, omega, lower=True)
    g = scipy.linalg.solve_triangular(r.T, z.T, lower=True).T
    g = 0.5 * (g + g.T)
    h = np.eye(n) + lam * g
    factor = scipy.linalg.cho_factor(h, lower=True)
    m_sorted = q @ scipy.linalg.cho_solve(factor, q.T)
    m_sorted = 0.5 * (m_sorted + m_sorted.T)
    # undo the internal sort so the matrix acts on y in input order
    inverse = np.argsort(order, kind="stable")
    m = m_sorted[np.ix_(inverse, inverse)]
    return RegressorMatrix(m=m, family="spline", complexity=lam)


# ---------------------------------------------------------------------------
# plain off-data predictors (used as references for the canonical rule)
# ---------------------------------------------------------------------------


def knn_predict(x, y, x0, k, metric="euclidean", period=None):
    """Average of the k nearest training responses at each query point."""
    pts = _points(x)
    queries = as_matrix(x0, "x0")
    yv = as_vector(y, "y")
    k = require_positive_int(k, "k")
    if k > pts.shape[0]:
        raise ValidationError(f"k={k} exceeds the sample size n={pts.shape[0]}")
    if metric == "circular":
        joined = _pairwise_distances(np.vstack([queries, pts]), metric, period)
        dist = joined[: queries.shape[0], queries.shape[0] :]
    else:
        dist = cdist(queries, pts)
    order = np.argsort(dist, axis=1, kind="stable")
    return yv[order[:, :k]].mean(axis=1)


def kernel_predict(x, y, x0, width):
    """Gaussian-kernel weighted average of training responses."""
    pts = _points(x)
    queries = as_matrix(x0, "x0")
    yv = as_vector(y, "y")
    width = require_positive_float(width, "width")
    sq = cdist(queries, pts, metric="sqeuclidean")
    with np.errstate(under="ignore"):
        w = np.exp(-sq / (2.0 * width * width))
    return (w @ yv) / w.sum(axis=1)


# ---------------------------------------------------------------------------
# self-consistent prediction
# ---------------------------------------------------------------------------

_FIXED_POINT_TOL = 1e-10


def canonical_predict(
    family,
    complexity,
    x0,
    data: Dataset,
    features=None,
    metric="euclidean",
    period=None,
):
    """Predict at ``x0`` by treating it as an extra sample point.

    The family's hat matrix ``M'`` is rebuilt on the augmented design
    ``(x0, x_1, ..., x_n)`` and the prediction solves the fixed-point
    condition ``y0 = (M' (y0, y))_0``, i.e.

        ``y0 = sum_j M'_{0j} y_j / (1 - M'_{00})``.

    Raises
    ------
    DegeneratePredictionError
        If ``M'_{00} >= 1 - 1e-10`` (no stable fixed point), or for
        ``knn_prime`` when ``x0`` coincides with a training point, which
        makes the closest-neighbour exclusion ambiguous.
    """
    if family not in FAMILIES:
        raise ValidationError(f"unknown family {family!r}; expected one of {FAMILIES}")
    point = np.atleast_1d(np.asarray(x0, dtype=float))
    if point.ndim != 1 or point.size != data.p:
        raise ValidationError(
            f"x0 must be a single point with {data.p} coordinate(s), got shape {point.shape}"
        )
    augmented = np.vstack([point[None, :], data.x])

    if family == "knn":
        mprime = knn_matrix(augmented, int(complexity), metric=metric, period=period).m
    elif family == "knn_prime":
        if np.any(np.all(data.x == point[None, :], axis=1)):
            raise DegeneratePredictionError(
                "x0 coincides with a training point; closest-neighbour "
                "exclusion is ambiguous there"
            )
        mprime = knn_prime_matrix(augmented, int(complexity), metric=metric, period=period).m
    elif family == "kernel":
        mprime = kernel_matrix(augmented, complexity).m
    elif family == "basis_projection":
        if features is None:
            raise ValidationError("basis_projection prediction needs a feature map")
        mprime = basis_projection_matrix(features(augmented)).m
    else:  # spline
        if data.p != 1:
            raise ValidationError("spline prediction requires one-dimensional x")
        mprime = spline_matrix(augmented[:, 0], complexity).m

    m00 = mprime[0, 0]
    if m00 >= 1.0 - _FIXED_POINT_TOL:
        raise DegeneratePredictionError(
            f"self-weight {m00:.17g} leaves no stable fixed point at x0"
        )
    return float(mprime[0, 1:] @ data.y / (1.0 - m00))
