"""Loss-rank complexity of kNN on regular grids and tori.

On a one-dimensional circular grid of ``n1`` equispaced sites, symmetric
kNN averaging (``k1`` odd: the site plus ``(k1-1)/2`` neighbours each
side) is a circulant operator whose eigenvalues have the closed form

    ``b_l = sin(pi l k1 / n1) / (k1 sin(pi l / n1))``,  ``b_{n1} = 1``.

The log-determinant of ``I - M`` restricted away from the constant mode
then reduces to sums of ``log(1 - b_l)``, and the per-parameter penalty
constant ``c = (k/n) * (-log det')`` has finite-sample, large-``n`` and
large-``k`` forms.  Cartesian-product grids (tori) follow by tensoring
the one-dimensional spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import sici

from .exceptions import BudgetExceededError, SingularityError, ValidationError
from .validation import require_positive_int

GRID_BUDGET = 10_000_000


@dataclass(frozen=True)
class GridSpec:
    """A ``dim``-dimensional torus with ``n1`` sites and ``k1`` neighbours per axis."""

    n1: int
    k1: int
    dim: int = 1

    def __post_init__(self):
        require_positive_int(self.n1, "n1", minimum=2)
        require_positive_int(self.k1, "k1")
        require_positive_int(self.dim, "dim")
        if self.k1 % 2 == 0:
            raise ValidationError(f"k1 must be odd, got {self.k1}")
        if self.k1 > self.n1:
            raise ValidationError(f"k1={self.k1} exceeds the grid size n1={self.n1}")

    @property
    def n(self) -> int:
        return self.n1**self.dim

    @property
    def k(self) -> int:
        return self.k1**self.dim


def _check_pair(n1, k1):
    GridSpec(n1=n1, k1=k1)
    return int(n1), int(k1)


def circulant_eigs(n1, k1):
    """Eigenvalues ``b_l``, ``l = 1..n1``, of circular kNN averaging.

    The final entry (``l = n1``) is the unit eigenvalue of the constant
    mode.  All other entries are strictly below one.
    """
    n1, k1 = _check_pair(n1, k1)
    l = np.arange(1, n1 + 1, dtype=float)
    b = np.empty(n1)
    b[-1] = 1.0
    inner = l[:-1]
    b[:-1] = np.sin(np.pi * inner * k1 / n1) / (k1 * np.sin(np.pi * inner / n1))
    return b


def grid_knn_dense(n1, k1):
    """Explicit circulant hat matrix of kNN on the circular grid."""
    n1, k1 = _check_pair(n1, k1)
    half = (k1 - 1) // 2
    row = np.zeros(n1)
    for offset in range(-half, half + 1):
        row[offset % n1] = 1.0 / k1
    m = np.empty((n1, n1))
    for i in range(n1):
        m[i] = np.roll(row, i)
    return m


def torus_knn_dense(spec: GridSpec):
    """Kronecker-product hat matrix of kNN on the torus (small grids only)."""
    if spec.n**2 > GRID_BUDGET:
        raise BudgetExceededError(
            f"dense torus operator has {spec.n}**2 entries, over the budget {GRID_BUDGET:g}"
        )
    m = grid_knn_dense(spec.n1, spec.k1)
    out = m
    for _ in range(spec.dim - 1):
        out = np.kron(out, m)
    return out


def c1_exact(n1, k1) -> float:
    """Finite-grid constant ``-(k1/n1) * sum_{l<n1} log(1 - b_l)``."""
    n1, k1 = _check_pair(n1, k1)
    b = circulant_eigs(n1, k1)[:-1]
    one_minus = 1.0 - b
    if np.any(one_minus <= 0.0):
        raise SingularityError("1 - b_l must stay positive on the restricted modes")
    return -(k1 / n1) * float(np.sum(np.log(one_minus)))


def _one_minus_ratio(z, k):
    """``1 - sin(k z) / (k sin z)`` with a series guard near z = 0."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    small = np.abs(z) < 1e-5
    zs = z[small]
    out[small] = (k * k - 1.0) / 6.0 * zs * zs
    zb = z[~small]
    out[~small] = 1.0 - np.sin(k * zb) / (k * np.sin(zb))
    return out


def c1_limit_k(k1) -> float:
    """Large-grid constant at fixed odd ``k1 >= 3``:

    ``-(k1/pi) * integral_{-pi/2}^{pi/2} log(1 - sin(k1 z)/(k1 sin z)) dz``.
    """
    k1 = require_positive_int(k1, "k1")
    if k1 % 2 == 0:
        raise ValidationError(f"k1 must be odd, got {k1}")
    if k1 < 3:
        raise ValidationError("k1 = 1 interpolates; its constant is undefined")

    def integrand(z):
        return math.log(float(_one_minus_ratio(np.array([z]), k1)[0]))

    value, _ = quad(integrand, 0.0, math.pi / 2.0, limit=200)
    return -(2.0 * k1 / math.pi) * value


def _one_minus_sinc(t):
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = np.abs(t) < 1e-4
    ts = t[small]
    out[small] = ts * ts / 6.0 * (1.0 - ts * ts / 20.0)
    tb = t[~small]
    out[~small] = 1.0 - np.sin(tb) / tb
    return out


def c1_limit(panels=1000, nodes=32) -> float:
    """Joint large-grid, large-``k1`` constant
    ``-(1/pi) * integral_{-inf}^{inf} log(1 - sin t / t) dt``.

    The head is integrated adaptively over ``[0, pi]`` (integrable log
    singularity at zero), the body with fixed Gauss-Legendre panels per
    period up to ``T = panels * pi``, and the oscillatory tail through
    the sine-integral expansion of ``log(1 - g) = -g - g^2/2 - ...``,
    leaving an ``O(T^-2)`` remainder.
    """
    panels = require_positive_int(panels, "panels", minimum=2)
    nodes = require_positive_int(nodes, "nodes", minimum=4)

    def integrand(t):
        return math.log(float(_one_minus_sinc(np.array([t]))[0]))

    head, _ = quad(integrand, 0.0, math.pi, limit=200)

    x, w = np.polynomial.legendre.leggauss(nodes)
    edges = math.pi * np.arange(1, panels + 1, dtype=float)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * (edges[1:] - edges[:-1])
    points = mids[:, None] + halves[:, None] * x[None, :]
    values = np.log(_one_minus_sinc(points))
    body = float(np.sum(halves[:, None] * w[None, :] * values))

    big_t = panels * math.pi
    si_t = sici(big_t)[0]
    si_2t = sici(2.0 * big_t)[0]
    half_pi = math.pi / 2.0
    tail = -(half_pi - si_t) - 0.5 * (
        math.sin(big_t) ** 2 / big_t + half_pi - si_2t
    )
    return -(2.0 / math.pi) * (head + body + tail)


def torus_logdet(spec: GridSpec) -> float:
    """``-log det`` of ``I - M`` on the torus, constant modes removed.

    The restricted eigenvalues are products ``b_{l_1} ... b_{l_dim}``
    over indices with every ``l_i < n1``; the sum of ``-log(1 - .)``
    over all of them is returned (unnormalised).
    """
    if (spec.n1 - 1) ** spec.dim > GRID_BUDGET:
        raise BudgetExceededError(
            f"torus spectrum has (n1-1)**dim = {(spec.n1 - 1) ** spec.dim} entries, "
            f"over the budget {GRID_BUDGET:g}"
        )
    b = circulant_eigs(spec.n1, spec.k1)[:-1]
    prods = b
    for _ in range(spec.dim - 1):
        prods = prods[..., None] * b
    if float(np.max(prods)) >= 1.0:
        raise SingularityError("a restricted torus mode reached eigenvalue one")
    return -float(np.sum(np.log1p(-prods)))


def torus_constant(spec: GridSpec) -> float:
    """Per-parameter constant ``(k/n) * torus_logdet`` on the torus."""
    return (spec.k / spec.n) * torus_logdet(spec)


def taylor_A(n1, k1, s, restricted=True) -> float:
    """Normalised power sums ``A_s = (k1/n1) * sum_l b_l**s``.

    ``restricted`` drops the constant mode ``l = n1``.  For ``s <= 2``
    the values follow exactly from ``tr M = tr M^2 = n1/k1`` (every row
    holds ``k1`` entries equal to ``1/k1``), so no floating summation is
    involved: restricted ``A_1 = A_2 = 1 - k1/n1`` and unrestricted
    ``A_1 = A_2 = 1``.
    """
    n1, k1 = _check_pair(n1, k1)
    s = require_positive_int(s, "s")
    if s <= 2:
        return 1.0 - k1 / n1 if restricted else 1.0
    b = circulant_eigs(n1, k1)
    if restricted:
        b = b[:-1]
    return (k1 / n1) * float(np.sum(b**s))


def c_d_taylor(spec: GridSpec, s_max) -> float:
    """Series form of the torus constant: ``sum_{s<=s_max} A_s**dim / s``.

    Uses the restricted power sums, for which the series converges
    whenever ``k1 < n1``.  For ``dim = 1`` the full series sums to
    ``c1_exact``.
    """
    s_max = require_positive_int(s_max, "s_max")
    total = 0.0
    a12 = taylor_A(spec.n1, spec.k1, 1, restricted=True)
    for s in (1, 2):
        if s <= s_max:
            total += a12**spec.dim / s
    if s_max <= 2:
        return total
    b = circulant_eigs(spec.n1, spec.k1)[:-1]
    scale = spec.k1 / spec.n1
    power = b * b
    for s in range(3, s_max + 1):
        power = power * b
        total += (scale * float(np.sum(power))) ** spec.dim / s
    return total


def c_infinite_dim() -> float:
    """Limit of the torus constant as the dimension grows.

    The unrestricted power sums satisfy ``A_1 = A_2 = 1`` exactly for
    every ``(n1, k1)`` while ``|A_s| < 1`` for ``s >= 3``, so only the
    first two series terms survive: the limit is ``1 + 1/2 = 3/2``.
    """
    return 1.5
