"""Classical selection criteria and effective-dimension diagnostics.

These are the comparison points for loss-rank selection: penalised
residual criteria (AIC, BIC, corrected AIC), generalised cross
validation, Bayesian marginal likelihood for linear basis regression,
and two notions of the effective number of parameters of a linear
smoother, including a determinant-based Taylor surrogate that stays
informative when the trace is blind (zero-diagonal smoothers).
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import DivergenceError, SingularityError, ValidationError
from .linalg import solve_spd
from .regressors import hat_matrix
from .validation import as_matrix, as_vector, require_positive_float, require_positive_int


def _check_rss(rss):
    rss = float(rss)
    if not rss > 0.0:
        raise ValidationError(f"rss must be positive, got {rss}")
    return rss


def aic(rss, n, d) -> float:
    """Akaike criterion ``n log(rss/n) + 2 d``."""
    rss = _check_rss(rss)
    n = require_positive_int(n, "n")
    d = require_positive_int(d, "d", minimum=0)
    return n * math.log(rss / n) + 2.0 * d


def bic(rss, n, d) -> float:
    """Schwarz criterion ``n log(rss/n) + d log n``."""
    rss = _check_rss(rss)
    n = require_positive_int(n, "n")
    d = require_positive_int(d, "d", minimum=0)
    return n * math.log(rss / n) + d * math.log(n)


def corrected_aic(rss, n, d) -> float:
    """Small-sample corrected criterion ``n log(rss/n) + n(n+d)/(n-d-2)``.

    Matches ``aic`` up to the likelihood constant ``n + 2`` as
    ``n -> infinity`` at fixed ``d``.
    """
    rss = _check_rss(rss)
    n = require_positive_int(n, "n")
    d = require_positive_int(d, "d", minimum=0)
    if n - d - 2 <= 0:
        raise ValidationError(f"corrected AIC needs n - d - 2 > 0, got n={n}, d={d}")
    return n * math.log(rss / n) + n * (n + d) / (n - d - 2)


def gcv(m, y) -> float:
    """Generalised cross validation ``n |y - M y|^2 / tr(I - M)^2``."""
    mat = hat_matrix(m)
    yv = as_vector(y, "y")
    n = mat.shape[0]
    if yv.shape[0] != n:
        raise ValidationError(f"y has length {yv.shape[0]}, hat matrix order is {n}")
    denom = n - float(np.trace(mat))
    if abs(denom) < 1e-12 * n:
        raise SingularityError("tr(I - M) is zero; GCV is undefined")
    resid = yv - mat @ yv
    return n * float(resid @ resid) / denom**2


def deff_htf(m) -> float:
    """Trace effective dimension of a linear smoother."""
    return float(np.trace(hat_matrix(m)))


def deff_mckay(d, alpha, a) -> float:
    """Posterior effective dimension ``d - alpha * tr(A^-1)``.

    ``a`` is the d x d posterior precision ``alpha C + beta B``; with a
    unit prior shape ``C = I`` this equals the trace effective dimension
    of the corresponding Bayesian hat matrix.
    """
    d = require_positive_int(d, "d")
    alpha = require_positive_float(alpha, "alpha")
    amat = as_matrix(a, "a")
    if amat.shape != (d, d):
        raise ValidationError(f"a must be {d} x {d}, got {amat.shape}")
    inv_trace = float(np.trace(solve_spd(amat, np.eye(d))))
    return d - alpha * inv_trace


def bayes_regressor_matrix(features, alpha, beta, prior_precision=None):
    """Posterior-mean hat matrix of Gaussian-prior linear basis regression.

    With design ``Phi``, noise precision ``beta`` and prior precision
    ``alpha * C`` (``C = I`` by default) the fitted values are
    ``beta Phi A^-1 Phi^T y`` with ``A = alpha C + beta Phi^T Phi``.
    Returns the plain (n, n) hat matrix.
    """
    phi = as_matrix(features, "features")
    alpha = require_positive_float(alpha, "alpha")
    beta = require_positive_float(beta, "beta")
    d = phi.shape[1]
    if d == 0:
        raise ValidationError("features must have at least one column")
    c = np.eye(d) if prior_precision is None else as_matrix(prior_precision, "prior_precision")
    if c.shape != (d, d):
        raise ValidationError(f"prior_precision must be {d} x {d}, got {c.shape}")
    a = alpha * c + beta * (phi.T @ phi)
    m = beta * (phi @ solve_spd(a, phi.T))
    return 0.5 * (m + m.T)


def bms_neg_log_evidence(m, y) -> float:
    """Negative log marginal likelihood of a Bayesian hat matrix.

    For ``S = I - M`` and the noise precision profiled out at its
    maximiser ``n / (y' S y)``:

        ``n/2 log(y' S y) - 1/2 log det S - n/2 log(n / (2 pi e))``.
    """
    mat = hat_matrix(m)
    yv = as_vector(y, "y")
    n = mat.shape[0]
    if yv.shape[0] != n:
        raise ValidationError(f"y has length {yv.shape[0]}, hat matrix order is {n}")
    s = np.eye(n) - mat
    sign, logdet = np.linalg.slogdet(s)
    if sign <= 0.0 or not np.isfinite(logdet):
        raise SingularityError("I - M must have positive determinant")
    quad = float(yv @ (s @ yv))
    if quad <= 0.0:
        raise SingularityError("y' (I - M) y must be positive")
    return 0.5 * n * math.log(quad) - 0.5 * logdet - 0.5 * n * math.log(n / (2.0 * math.pi * math.e))


# ---------------------------------------------------------------------------
# determinant-based effective complexity
# ---------------------------------------------------------------------------

UNIT_MODE_TOL = 1e-10


def _non_unit_eigenvalues(m, unit_tol):
    eigs = np.linalg.eigvals(hat_matrix(m))
    keep = np.abs(eigs - 1.0) > unit_tol
    return eigs[keep]


def restricted_power_trace(m, s, unit_tol=UNIT_MODE_TOL) -> float:
    """``tr(M^s)`` over the eigenspace away from eigenvalue one."""
    s = require_positive_int(s, "s")
    eigs = _non_unit_eigenvalues(m, unit_tol)
    return float(np.sum(eigs**s).real)


def taylor_logdet(m, order, unit_tol=UNIT_MODE_TOL) -> float:
    """Series approximation of ``-log det(I - M)`` away from unit modes.

    Sums ``tr(M^s)/s`` for ``s = 1..order`` over the non-unit eigenspace.
    The restricted spectral radius must be below one for the series to
    converge; otherwise :class:`DivergenceError` is raised.
    """
    order = require_positive_int(order, "order")
    eigs = _non_unit_eigenvalues(m, unit_tol)
    if eigs.size:
        radius = float(np.abs(eigs).max())
        if radius >= 1.0:
            raise DivergenceError(
                f"restricted spectral radius {radius:.6g} is not below one"
            )
    total = 0.0
    power = np.ones_like(eigs)
    for s in range(1, order + 1):
        power = power * eigs
        total += float(np.sum(power).real) / s
    return total
