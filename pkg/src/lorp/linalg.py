"""Dense symmetric eigensolves and positive-definite kernels.

Everything the scoring code needs from linear algebra lives here:
spectra of symmetric matrices with zero-mode bookkeeping, log-determinants
of positive-definite matrices, and SPD solves.  LAPACK (via numpy/scipy)
does the heavy lifting; this module adds validation and the error
taxonomy used by the rest of the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import NotPositiveDefiniteError, SolveError
from .validation import require_symmetric

#: Relative threshold below which an eigenvalue counts as a zero mode.
ZERO_MODE_RTOL = 1e-10


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a symmetric matrix in nondecreasing order.

    Parameters
    ----------
    eigenvalues : ndarray
        Sorted eigenvalues, smallest first.
    zero_tol : float
        Absolute threshold used to classify zero modes.  An eigenvalue
        ``lam`` is a zero mode when ``lam <= zero_tol``.
    """

    eigenvalues: np.ndarray
    zero_tol: float
    zero_mode_count: int = field(init=False)

    def __post_init__(self):
        eigs = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(eigs) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        object.__setattr__(self, "eigenvalues", eigs)
        count = int(np.sum(eigs <= self.zero_tol))
        object.__setattr__(self, "zero_mode_count", count)

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


def sym_eig(a, return_vectors=False, zero_rtol=ZERO_MODE_RTOL):
    """Spectrum of a symmetric matrix.

    Parameters
    ----------
    a : ndarray of shape (n, n)
        Symmetric input; asymmetry beyond a small tolerance is rejected.
    return_vectors : bool
        When true, also return the orthonormal eigenvector matrix whose
        columns match the sorted eigenvalues.
    zero_rtol : float
        Zero modes are eigenvalues at or below ``zero_rtol`` times the
        largest eigenvalue magnitude.

    Returns
    -------
    Spectrum, or (Spectrum, ndarray) when ``return_vectors`` is set.
    """
    arr = require_symmetric(a, "sym_eig input")
    # eigh returns ascending eigenvalues for the symmetrized operator
    sym = 0.5 * (arr + arr.T)
    if return_vectors:
        eigs, vecs = np.linalg.eigh(sym)
    else:
        eigs = np.linalg.eigvalsh(sym)
        vecs = None
    scale = float(np.abs(eigs).max()) if eigs.size else 0.0
    spectrum = Spectrum(eigenvalues=eigs, zero_tol=zero_rtol * scale)
    if return_vectors:
        return spectrum, vecs
    return spectrum


def cholesky_psd(a, name="matrix"):
    """Lower Cholesky factor of a symmetric positive-definite matrix."""
    arr = require_symmetric(a, name)
    try:
        return scipy.linalg.cholesky(arr, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"{name} is not positive definite") from exc


def log_det_psd(a) -> float:
    """log det of a symmetric positive-definite matrix via Cholesky."""
    factor = cholesky_psd(a, "log_det_psd input")
    return 2.0 * float(np.sum(np.log(np.diag(factor))))


def solve_spd(a, b):
    """Solve ``a @ x = b`` for symmetric positive-definite ``a``."""
    arr = require_symmetric(a, "solve_spd matrix")
    rhs = np.asarray(b, dtype=float)
    if rhs.shape[0] != arr.shape[0]:
        raise SolveError(
            f"right-hand side length {rhs.shape[0]} does not match matrix "
            f"order {arr.shape[0]}"
        )
    try:
        factor = scipy.linalg.cho_factor(arr, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise SolveError("matrix is singular or indefinite") from exc
    return scipy.linalg.cho_solve(factor, rhs)
