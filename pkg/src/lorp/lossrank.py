"""Loss-rank scores for y-linear regressors.

The rank of a regressor on data ``(x, y)`` counts fictitious responses it
would fit at least as well as the observed one.  For a regressor with hat
matrix ``M`` and quadratic loss the continuous analogue is the log-volume
of the ellipsoid ``{y' : y'^T S_a y' <= y^T S_a y}`` with
``S_a = (I - M)^T (I - M) + a I``, which evaluates to

    ``n/2 * log(y^T S_a y) - 1/2 * log det S_a + log v_n``

with ``v_n`` the unit-ball volume.  The regulariser ``a`` (written
``alpha`` below) is a nuisance parameter minimised out.  Projections
admit a closed form; exhaustive oracles for tiny discrete and gridded
problems live at the bottom of the module and anchor the analytic paths.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, rel_entr, xlogy

from .exceptions import (
    BudgetExceededError,
    DegenerateFitError,
    RankDeficientError,
    SingularityError,
    ValidationError,
)
from .linalg import Spectrum, sym_eig
from .regressors import Dataset, hat_matrix
from .validation import as_vector, require_positive_float, require_positive_int

DEFAULT_ALPHA_BOUNDS = (1e-12, 1e6)
DEFAULT_ALPHA_GRID_POINTS = 200
ORACLE_BUDGET = 10_000_000


@dataclass(frozen=True)
class LossRankScore:
    """Loss-rank value split into its fit and determinant parts.

    ``value = fit_term + complexity_term`` plus the unit-ball constant
    when ``include_vn`` is set.  ``mode`` records how ``alpha`` was
    chosen ("fixed" or "optimize").
    """

    value: float
    alpha: float
    fit_term: float
    complexity_term: float
    include_vn: bool
    mode: str


@dataclass(frozen=True)
class ProjectiveScore:
    """Closed-form loss rank of a rank-d projection regressor.

    ``rho_fit`` is the residual fraction ``|y - yhat|^2 / |y|^2``;
    ``alpha_m`` the minimising regulariser (None when the response-penalty
    variant has no interior minimum); ``kl`` the Bernoulli divergence
    ``KL(d/n || 1 - rho_fit)`` that drives selection.
    """

    d: int
    rho_fit: float
    alpha_m: float | None
    kl: float
    value: float


def unit_ball_log_volume(n, rho=2.0) -> float:
    """log volume of the unit ball of the rho-norm in R^n."""
    n = require_positive_int(n, "n")
    rho = require_positive_float(rho, "rho")
    if rho < 1.0:
        raise ValidationError(f"rho must be >= 1 for a norm, got {rho}")
    return n * (math.log(2.0) + gammaln(1.0 / rho + 1.0)) - gammaln(n / rho + 1.0)


def kl_bernoulli(p, q) -> float:
    """KL divergence between Bernoulli(p) and Bernoulli(q), natural log."""
    p = float(p)
    q = float(q)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    if not 0.0 < q < 1.0:
        raise ValidationError(f"q must lie in (0, 1), got {q}")
    return float(rel_entr(p, q) + rel_entr(1.0 - p, 1.0 - q))


def binary_entropy(p) -> float:
    """Entropy of Bernoulli(p) in nats."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    return float(-xlogy(p, p) - xlogy(1.0 - p, 1.0 - p))


# ---------------------------------------------------------------------------
# quadratic-loss scores for a general hat matrix
# ---------------------------------------------------------------------------


def residual_spectrum(m, y):
    """Spectrum of ``S_0 = (I - M)^T (I - M)`` plus ``y^T S_0 y`` and ``|y|^2``.

    This is the expensive part of scoring; callers that sweep ``alpha``
    reuse the returned triple.
    """
    mat = hat_matrix(m)
    yv = as_vector(y, "y")
    n = mat.shape[0]
    if yv.shape[0] != n:
        raise ValidationError(f"y has length {yv.shape[0]}, hat matrix order is {n}")
    ynorm2 = float(yv @ yv)
    if ynorm2 == 0.0:
        raise ValidationError("y must be a nonzero vector")
    imat = np.eye(n) - mat
    s0 = imat.T @ imat
    resid = imat @ yv
    return sym_eig(s0), float(resid @ resid), ynorm2


def _kept_eigenvalues(spectrum: Spectrum, drop_zero_modes: int):
    eigs = np.maximum(spectrum.eigenvalues, 0.0)  # clamp PSD roundoff
    drop = require_positive_int(drop_zero_modes, "drop_zero_modes", minimum=0)
    if drop:
        if drop > spectrum.zero_mode_count:
            raise ValidationError(
                f"cannot drop {drop} zero modes, spectrum only has "
                f"{spectrum.zero_mode_count}"
            )
        eigs = eigs[drop:]
    return eigs


def _score_at_alpha(eigs, q0, ynorm2, n, alpha, include_vn):
    fit = 0.5 * n * math.log(q0 + alpha * ynorm2)
    complexity = -0.5 * float(np.sum(np.log(eigs + alpha)))
    value = fit + complexity
    if include_vn:
        value += unit_ball_log_volume(n)
    return value, fit, complexity


def loss_rank_fixed_alpha(m, y, alpha, include_vn=False, drop_zero_modes=0) -> LossRankScore:
    """Loss rank of hat matrix ``m`` on response ``y`` at a fixed regulariser.

    ``alpha = 0`` is only legal when ``S_0`` is nonsingular (after the
    optional zero-mode drop); otherwise the log-determinant diverges.
    """
    alpha = require_positive_float(alpha, "alpha", allow_zero=True)
    spectrum, q0, ynorm2 = residual_spectrum(m, y)
    eigs = _kept_eigenvalues(spectrum, drop_zero_modes)
    if alpha == 0.0:
        if eigs.size and eigs[0] <= spectrum.zero_tol:
            raise SingularityError(
                "alpha = 0 with a singular S_0 "
                f"({spectrum.zero_mode_count - drop_zero_modes} zero mode(s) remain)"
            )
        if q0 <= 0.0:
            raise DegenerateFitError("residual is zero and alpha = 0; rank is -inf")
    n = spectrum.n
    value, fit, complexity = _score_at_alpha(eigs, q0, ynorm2, n, alpha, include_vn)
    return LossRankScore(
        value=value,
        alpha=alpha,
        fit_term=fit,
        complexity_term=complexity,
        include_vn=include_vn,
        mode="fixed",
    )


def optimize_alpha(
    spectrum: Spectrum,
    q0,
    ynorm2,
    include_vn=False,
    drop_zero_modes=0,
    grid_points=DEFAULT_ALPHA_GRID_POINTS,
    bounds=DEFAULT_ALPHA_BOUNDS,
) -> LossRankScore:
    """Minimise the loss rank over the regulariser ``alpha``.

    A log-spaced grid over ``bounds`` locates the basin and a golden
    section search in log-alpha refines it.  An all-zero spectrum with a
    zero residual describes a regressor that interpolates every response;
    its rank is degenerate and raises :class:`DegenerateFitError`.
    """
    q0 = require_positive_float(q0, "q0", allow_zero=True)
    ynorm2 = require_positive_float(ynorm2, "ynorm2")
    n = spectrum.n
    eigs = _kept_eigenvalues(spectrum, drop_zero_modes)
    if q0 <= 1e-12 * ynorm2 and np.all(eigs <= spectrum.zero_tol):
        raise DegenerateFitError(
            "regressor interpolates every response (S_0 = 0); loss rank is -inf"
        )

    lo, hi = bounds
    lo = require_positive_float(lo, "bounds[0]")
    hi = require_positive_float(hi, "bounds[1]")
    if hi <= lo:
        raise ValidationError(f"alpha bounds must satisfy lo < hi, got {bounds}")
    grid_points = require_positive_int(grid_points, "grid_points", minimum=3)

    def value_at(log_alpha):
        return _score_at_alpha(eigs, q0, ynorm2, n, math.exp(log_alpha), include_vn)[0]

    log_grid = np.linspace(math.log(lo), math.log(hi), grid_points)
    grid_values = [value_at(la) for la in log_grid]
    best = int(np.argmin(grid_values))

    # golden-section refinement inside the bracketing grid cells
    left = log_grid[max(best - 1, 0)]
    right = log_grid[min(best + 1, grid_points - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = left, right
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = value_at(c), value_at(d)
    for _ in range(100):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = value_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = value_at(d)
    log_alpha = c if fc < fd else d
    candidates = [(grid_values[best], log_grid[best]), (min(fc, fd), log_alpha)]
    best_value, best_log_alpha = min(candidates)
    alpha = math.exp(best_log_alpha)
    value, fit, complexity = _score_at_alpha(eigs, q0, ynorm2, n, alpha, include_vn)
    return LossRankScore(
        value=value,
        alpha=alpha,
        fit_term=fit,
        complexity_term=complexity,
        include_vn=include_vn,
        mode="optimize",
    )


def loss_rank(m, y, alpha="optimize", include_vn=False, drop_zero_modes=0) -> LossRankScore:
    """Convenience wrapper: score a hat matrix at fixed or optimised alpha."""
    if alpha == "optimize":
        spectrum, q0, ynorm2 = residual_spectrum(m, y)
        return optimize_alpha(
            spectrum, q0, ynorm2, include_vn=include_vn, drop_zero_modes=drop_zero_modes
        )
    return loss_rank_fixed_alpha(
        m, y, alpha, include_vn=include_vn, drop_zero_modes=drop_zero_modes
    )


# ---------------------------------------------------------------------------
# projections: closed form
# ---------------------------------------------------------------------------


def projective_loss_rank(d, y, yhat, include_vn=False, penalty="response") -> ProjectiveScore:
    """Closed-form loss rank for a projection regressor of rank ``d``.

    With residual fraction ``rho = |y - yhat|^2 / |y|^2`` the minimised
    score is ``n/2 * log(|y|^2) - n/2 * KL(d/n || 1 - rho)``.

    ``penalty`` selects the regularisation flavour: "response" penalises
    ``alpha |y'|^2`` (interior minimum only when ``1 - rho > d/n``),
    "estimate" penalises ``alpha |M y'|^2``, whose minimiser
    ``rho d / ((1 - rho)(n - d))`` always exists.  Both give the same
    minimised value.
    """
    yv = as_vector(y, "y")
    fitted = as_vector(yhat, "yhat")
    if fitted.shape != yv.shape:
        raise ValidationError("y and yhat must have the same length")
    n = yv.shape[0]
    d = require_positive_int(d, "d")
    if d >= n:
        raise ValidationError(f"projection rank d={d} must be below n={n}")
    ynorm2 = float(yv @ yv)
    if ynorm2 == 0.0:
        raise ValidationError("y must be a nonzero vector")
    resid = yv - fitted
    rho = float(resid @ resid) / ynorm2
    if not 0.0 < rho < 1.0:
        raise DegenerateFitError(
            f"residual fraction rho={rho:.3g} is outside (0, 1); "
            "the closed form is undefined"
        )
    if penalty == "response":
        denom = (1.0 - rho) * n - d
        alpha_m = rho * d / denom if denom > 0.0 else None
    elif penalty == "estimate":
        alpha_m = rho * d / ((1.0 - rho) * (n - d))
    else:
        raise ValidationError(f"penalty must be 'response' or 'estimate', got {penalty!r}")
    kl = kl_bernoulli(d / n, 1.0 - rho)
    value = 0.5 * n * math.log(ynorm2) - 0.5 * n * kl
    if include_vn:
        value += unit_ball_log_volume(n)
    return ProjectiveScore(d=d, rho_fit=rho, alpha_m=alpha_m, kl=kl, value=value)


# ---------------------------------------------------------------------------
# linear variable selection
# ---------------------------------------------------------------------------


def subset_design(subset, data: Dataset):
    """Design matrix for a covariate subset; index 0 is the intercept.

    Indices ``j >= 1`` select column ``j`` of ``data.x`` (one-based).
    """
    idx = list(subset)
    if not idx:
        raise ValidationError("subset must contain at least one index")
    if len(set(idx)) != len(idx):
        raise ValidationError("subset indices must be distinct")
    cols = []
    for j in idx:
        j = require_positive_int(j, "subset index", minimum=0)
        if j > data.p:
            raise ValidationError(f"subset index {j} exceeds covariate count {data.p}")
        cols.append(np.ones(data.n) if j == 0 else data.x[:, j - 1])
    return np.column_stack(cols)


def _subset_fit(subset, data: Dataset):
    design = subset_design(subset, data)
    d = design.shape[1]
    if d >= data.n:
        raise ValidationError(f"subset size {d} must be below n={data.n}")
    q, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    if np.any(diag <= 1e-10 * diag.max()):
        raise RankDeficientError(
            "subset design is rank deficient", column=int(np.argmin(diag))
        )
    coef = q.T @ data.y
    resid = data.y - q @ coef
    return d, float(resid @ resid)


def variable_selection_score(subset, data: Dataset) -> float:
    """Loss rank of the least-squares fit on a covariate subset.

    Evaluates ``n/2 log(n sighat^2) + n/2 H(d/n) + d/2 log((1-rho)/rho)``
    with ``d`` the subset size, ``sighat^2`` the ML residual variance and
    ``rho`` the residual fraction.  Algebraically identical to the
    projective closed form on the same fit.
    """
    n = data.n
    d, rss = _subset_fit(subset, data)
    ynorm2 = float(data.y @ data.y)
    if ynorm2 == 0.0:
        raise ValidationError("y must be a nonzero vector")
    rho = rss / ynorm2
    if not 0.0 < rho < 1.0:
        raise DegenerateFitError(
            f"residual fraction rho={rho:.3g} is outside (0, 1)"
        )
    sigma2 = rss / n
    return (
        0.5 * n * math.log(n * sigma2)
        + 0.5 * n * binary_entropy(d / n)
        + 0.5 * d * math.log((1.0 - rho) / rho)
    )


def caic_score(subset, data: Dataset) -> float:
    """Corrected-AIC style loss rank of a subset fit.

    Equals the loss rank at the vanishing regulariser
    ``exp(-n(n+d) / (d(n-d-2)))`` up to a constant and o(1) terms:
    ``n log(sighat^2) + n (n + d) / (n - d - 2)``.
    """
    from .criteria import corrected_aic

    n = data.n
    d, rss = _subset_fit(subset, data)
    if rss <= 0.0:
        raise DegenerateFitError("subset fit interpolates y; score is -inf")
    return corrected_aic(rss, n, d)


# ---------------------------------------------------------------------------
# general rho-norm loss
# ---------------------------------------------------------------------------


def rho_norm_loss_rank(m, y, rho, shrink=1.0) -> float:
    """Loss rank under the loss ``|(I - shrink*M) y|_rho``.

    The sublevel sets are rho-norm balls mapped through
    ``I - shrink * M``, so the log-volume is
    ``n log |(I - shrink M) y|_rho - log |det(I - shrink M)| + log v_n``
    with ``v_n`` the rho-norm unit-ball volume.  Any strictly monotone
    transform of the loss leaves the sublevel sets, hence the value,
    unchanged.
    """
    mat = hat_matrix(m)
    yv = as_vector(y, "y")
    n = mat.shape[0]
    if yv.shape[0] != n:
        raise ValidationError(f"y has length {yv.shape[0]}, hat matrix order is {n}")
    rho = require_positive_float(rho, "rho")
    if rho < 1.0:
        raise ValidationError(f"rho must be >= 1 for a norm, got {rho}")
    shrink = float(shrink)
    amat = np.eye(n) - shrink * mat
    sign, logabsdet = np.linalg.slogdet(amat)
    if sign == 0.0 or not np.isfinite(logabsdet):
        raise SingularityError("I - shrink * M is singular; volume is unbounded")
    resid = amat @ yv
    norm = float(np.sum(np.abs(resid) ** rho) ** (1.0 / rho))
    if norm == 0.0:
        raise DegenerateFitError("loss is zero; rank is -inf")
    return n * math.log(norm) - logabsdet + unit_ball_log_volume(n, rho)


# ---------------------------------------------------------------------------
# exhaustive oracles
# ---------------------------------------------------------------------------


def _loss_function(predictor, x):
    """Normalise the predictor argument to a vectorised loss on rows of y'."""
    if callable(predictor):

        def loss(block):
            out = np.empty(block.shape[0])
            for i, row in enumerate(block):
                fitted = np.asarray(predictor(x, row), dtype=float)
                out[i] = float(np.sum((row - fitted) ** 2))
            return out

        return loss
    mat = hat_matrix(predictor)

    def loss(block):
        resid = block - block @ mat.T
        return np.einsum("ij,ij->i", resid, resid)

    return loss


def discrete_rank_oracle(predictor, yspace, data: Dataset, budget=ORACLE_BUDGET, rtol=1e-9) -> int:
    """Exact loss rank over a finite response space, by enumeration.

    ``predictor`` is either a hat matrix (vectorised path) or a callable
    ``predictor(x, y') -> fitted values``.  Every response vector with
    coordinates drawn from ``yspace`` is enumerated and those with loss
    at most the observed loss (within relative tolerance ``rtol``, so
    exact ties count) contribute to the rank.
    """
    values = as_vector(np.asarray(yspace, dtype=float).reshape(-1), "yspace")
    if values.size == 0:
        raise ValidationError("yspace must be nonempty")
    if np.unique(values).size != values.size:
        raise ValidationError("yspace values must be distinct")
    n = data.n
    total = float(values.size) ** n
    if total > budget:
        raise BudgetExceededError(
            f"enumeration size {values.size}**{n} exceeds the budget {budget:g}"
        )
    loss = _loss_function(predictor, data.x)
    observed = float(loss(data.y[None, :])[0])
    threshold = observed * (1.0 + rtol) + 1e-12
    count = 0
    chunk = []
    chunk_rows = max(1, min(100_000, int(total)))
    for combo in itertools.product(values, repeat=n):
        chunk.append(combo)
        if len(chunk) == chunk_rows:
            count += int(np.count_nonzero(loss(np.asarray(chunk)) <= threshold))
            chunk = []
    if chunk:
        count += int(np.count_nonzero(loss(np.asarray(chunk)) <= threshold))
    return count


def _cartesian(arrays):
    if not arrays:
        return np.empty((1, 0))
    grids = np.meshgrid(*arrays, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def grid_volume_oracle(loss, bounds, level, eps, budget=ORACLE_BUDGET, rtol=1e-9) -> float:
    """Volume of ``{y' : loss(y') <= level}`` by counting grid cells.

    ``loss`` must map an (m, n) array of candidate responses to their m
    loss values.  Each axis of the bounding box is cut into cells of edge
    ``eps`` (which must divide every edge length) and cells are counted
    through their midpoints.  As in :func:`discrete_rank_oracle`, the
    comparison allows relative slack ``rtol`` plus 1e-12 absolute so that
    exact ties and pure-roundoff losses (an interpolating regressor has
    loss 0, not 1e-30) land inside the set.
    """
    eps = require_positive_float(eps, "eps")
    level = float(level)
    threshold = level * (1.0 + rtol) + 1e-12
    axes = []
    for i, (lo, hi) in enumerate(bounds):
        lo, hi = float(lo), float(hi)
        if hi <= lo:
            raise ValidationError(f"bounds[{i}] must satisfy lo < hi, got ({lo}, {hi})")
        width = hi - lo
        cells = round(width / eps)
        if cells < 1 or abs(cells * eps - width) > 1e-9 * width:
            raise ValidationError(
                f"eps={eps} does not divide the edge length {width} of axis {i}"
            )
        axes.append(lo + (np.arange(cells) + 0.5) * eps)
    n = len(axes)
    if n == 0:
        raise ValidationError("bounds must contain at least one axis")
    total = math.prod(len(a) for a in axes)
    if total > budget:
        raise BudgetExceededError(f"grid size {total} exceeds the budget {budget:g}")

    inner = _cartesian(axes[1:])
    count = 0
    block = max(1, int(2_000_000 // max(1, inner.shape[0])))
    first = axes[0]
    for start in range(0, first.size, block):
        vals = first[start : start + block]
        if n == 1:
            rows = vals[:, None]
        else:
            rows = np.column_stack(
                [np.repeat(vals, inner.shape[0]), np.tile(inner, (vals.size, 1))]
            )
        count += int(np.count_nonzero(np.asarray(loss(rows)) <= threshold))
    return count * eps**n
