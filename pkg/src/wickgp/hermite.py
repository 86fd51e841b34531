"""2D Hermite eigenbasis of H = Laplacian - |x|^2, Gauss-Hermite quadrature,
coefficient/grid transforms and the ladder-operator calculus.

The basis functions are h_k = psi_{k1} (x) psi_{k2} with -H h_k = lam_k^2 h_k,
lam_k^2 = 2(k1+k2)+2.  Fields live either as Hermite coefficients on the
square index set {0..K-1}^2 (CoefField) or as samples on the tensor
Gauss-Hermite node grid (GridField).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

_LOG2 = math.log(2.0)
_LN_PI_QUARTER = 0.25 * math.log(math.pi)
# rescale the recurrence pair whenever it leaves [2^-500, 2^500]
_SCALE_EXP = 500
_SCALE_UP = math.ldexp(1.0, _SCALE_EXP)
_SCALE_DOWN = math.ldexp(1.0, -_SCALE_EXP)


def hermite_1d(n, x):
    """Evaluate the L2-normalized Hermite function psi_n at x (scalar or array).

    Uses the stable three-term recurrence
        psi_{n+1} = x sqrt(2/(n+1)) psi_n - sqrt(n/(n+1)) psi_{n-1},
    seeded with psi_0 = pi^{-1/4} exp(-x^2/2).  The pair is carried with a
    power-of-two exponent offset so that the seed never underflows for large
    |x|; rescaling by powers of two is exact in binary floating point.
    """
    if n < 0:
        raise ValueError("Hermite index must be nonnegative")
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)

    log0 = -0.5 * x * x - _LN_PI_QUARTER
    expo = np.floor(log0 / _LOG2)
    p_prev = np.zeros_like(x)
    p_cur = np.exp(log0 - expo * _LOG2)  # psi_0 * 2^{-expo}, in [1/2, 2]
    for m in range(n):
        p_next = x * math.sqrt(2.0 / (m + 1)) * p_cur - math.sqrt(m / (m + 1.0)) * p_prev
        p_prev, p_cur = p_cur, p_next
        big = np.abs(p_cur) > _SCALE_UP
        if big.any():
            p_cur = np.where(big, p_cur * _SCALE_DOWN, p_cur)
            p_prev = np.where(big, p_prev * _SCALE_DOWN, p_prev)
            expo = np.where(big, expo + _SCALE_EXP, expo)
        small = (np.abs(p_cur) < _SCALE_DOWN) & (np.abs(p_prev) < _SCALE_DOWN) & (np.abs(p_cur) > 0)
        if small.any():
            p_cur = np.where(small, p_cur * _SCALE_UP, p_cur)
            p_prev = np.where(small, p_prev * _SCALE_UP, p_prev)
            expo = np.where(small, expo - _SCALE_EXP, expo)
    out = np.ldexp(p_cur, expo.astype(np.int64))
    return float(out[0]) if scalar else out


def hermite_table(nmax, x):
    """Matrix psi_n(x_i) for n = 0..nmax, x an array of abscissae.

    Intended for quadrature nodes, where no underflow is possible; the plain
    recurrence is used row by row.
    """
    x = np.asarray(x, dtype=np.float64)
    tbl = np.empty((nmax + 1, x.size))
    tbl[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if nmax >= 1:
        tbl[1] = x * math.sqrt(2.0) * tbl[0]
    for m in range(1, nmax):
        tbl[m + 1] = x * math.sqrt(2.0 / (m + 1)) * tbl[m] - math.sqrt(m / (m + 1.0)) * tbl[m - 1]
    return tbl


@dataclass(frozen=True)
class SpectralGrid:
    """Square Hermite basis {0..K-1}^2 together with its quadrature grid.

    nodes/weights are the order-Mq Gauss-Hermite rule with modified weights
    w~_i = w_i exp(x_i^2), so that sum w~_i f(x_i) approximates the plain
    Lebesgue integral of a Gaussian-decaying f.  Mq >= 2K guarantees exact
    quadrature on products of two retained basis functions.
    """

    K: int
    Mq: int
    nodes: np.ndarray          # (Mq,)
    weights: np.ndarray        # (Mq,) modified weights, strictly positive
    psi: np.ndarray            # (K+1, Mq) Hermite values; row K feeds derivatives
    dpsi: np.ndarray           # (K, Mq) psi_n'(x_i)
    lam2: np.ndarray           # (K, K) eigenvalues 2(k1+k2)+2
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    @property
    def analysis_matrix(self):
        return self.psi[: self.K] * self.weights

    def cached(self, key, builder):
        """Read-mostly cache shared across realizations (counterterms etc.)."""
        try:
            return self._cache[key]
        except KeyError:
            pass
        with self._lock:
            if key not in self._cache:
                self._cache[key] = builder()
            return self._cache[key]


def build_grid(K, Mq):
    """Build a SpectralGrid with basis cutoff K and Mq quadrature points per axis.

    Nodes come from the Golub-Welsch eigendecomposition of the Jacobi matrix
    of the Hermite polynomials.  The modified weight w~_i = w_i exp(x_i^2) is
    assembled through the Christoffel identity w~_i = 1 / sum_n psi_n(x_i)^2
    (n < Mq), which is the log-space-safe form: the raw w_i would underflow
    for Mq of a few hundred while the Hermite-function sum stays in range.
    """
    if K < 1:
        raise ValueError("basis cutoff K must be >= 1")
    if Mq < 2 * K:
        raise ValueError(f"need Mq >= 2K for dealiased transforms, got Mq={Mq}, K={K}")

    offdiag = np.sqrt(np.arange(1, Mq) / 2.0)
    nodes = eigh_tridiagonal(np.zeros(Mq), offdiag, eigvals_only=True)
    # enforce the exact symmetry of the rule about 0
    nodes = 0.5 * (nodes - nodes[::-1])
    if Mq % 2 == 1:
        nodes[Mq // 2] = 0.0
    tbl = hermite_table(Mq - 1, nodes)
    weights = 1.0 / np.sum(tbl * tbl, axis=0)
    weights = 0.5 * (weights + weights[::-1])

    psi = hermite_table(K, nodes)
    npk = np.arange(K)[:, None]
    dpsi = np.sqrt(npk / 2.0) * np.vstack([np.zeros(Mq), psi[: K - 1]]) - np.sqrt((npk + 1) / 2.0) * psi[1 : K + 1]
    k1 = np.arange(K)
    lam2 = 2.0 * (k1[:, None] + k1[None, :]) + 2.0
    for arr in (nodes, weights, psi, dpsi, lam2):
        arr.setflags(write=False)
    return SpectralGrid(K=K, Mq=Mq, nodes=nodes, weights=weights, psi=psi, dpsi=dpsi, lam2=lam2)


@dataclass(frozen=True)
class CoefField:
    """Complex field represented by Hermite coefficients c_k on {0..K-1}^2."""

    grid: SpectralGrid
    coef: np.ndarray           # (K, K) complex128
    is_real: bool = False

    def __post_init__(self):
        if self.coef.shape != (self.grid.K, self.grid.K):
            raise ValueError("coefficient array does not match the grid cutoff")
        if self.is_real and np.abs(self.coef.imag).max() > 1e-13 * max(1.0, np.abs(self.coef.real).max()):
            raise ValueError("field flagged real but has imaginary coefficients")

    def l2_norm(self):
        return float(np.linalg.norm(self.coef))

    def copy_with(self, coef, is_real=None):
        return CoefField(self.grid, coef, self.is_real if is_real is None else is_real)


@dataclass(frozen=True)
class GridField:
    """Field sampled at the tensor Gauss-Hermite nodes (Mq x Mq)."""

    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (self.grid.Mq, self.grid.Mq):
            raise ValueError("value array does not match the quadrature grid")


def coef_field(grid, coef, is_real=False):
    arr = np.asarray(coef, dtype=np.complex128)
    return CoefField(grid, arr, is_real)


def zero_coef(grid, is_real=False):
    return CoefField(grid, np.zeros((grid.K, grid.K), dtype=np.complex128), is_real)


def delta_coef(grid, k1, k2, amplitude=1.0):
    c = np.zeros((grid.K, grid.K), dtype=np.complex128)
    c[k1, k2] = amplitude
    return CoefField(grid, c, is_real=(np.imag(amplitude) == 0))


def synthesize(c: CoefField) -> GridField:
    """Pointwise sums sum_k c_k h_k(node) on the tensor grid."""
    psi = c.grid.psi[: c.grid.K]
    return GridField(c.grid, psi.T @ c.coef @ psi)


def analyze(g: GridField) -> CoefField:
    """Project grid samples onto the retained basis: c_k = <g, h_k> by quadrature."""
    an = g.grid.analysis_matrix
    return CoefField(g.grid, np.ascontiguousarray((an @ g.values @ an.T).astype(np.complex128)))


def quad_integral(g: GridField):
    """Quadrature approximation of the plain integral of g."""
    w = g.grid.weights
    return w @ g.values @ w


def grid_l2_norm(g: GridField):
    return float(math.sqrt(quad_integral(GridField(g.grid, np.abs(g.values) ** 2)).real))


def grid_lq_norm(g: GridField, q):
    """Quadrature L^q norm (q < inf) or node max (q = inf)."""
    if q == np.inf:
        return float(np.abs(g.values).max())
    w = g.grid.weights
    return float((w @ np.abs(g.values) ** q @ w) ** (1.0 / q))


def apply_spectral_multiplier(c: CoefField, m) -> CoefField:
    """Diagonal action (m c)_k = m(k) c_k.

    m may be a (K, K) array or a callable (k1, k2) -> scalar evaluated on the
    index arrays.  Covers (-H)^alpha, the propagator phases exp(-i lam^2 t)
    and the smooth cutoff multipliers.
    """
    grid = c.grid
    if callable(m):
        k1 = np.arange(grid.K)
        marr = np.asarray(m(k1[:, None], k1[None, :]))
    else:
        marr = np.asarray(m)
    out = marr * c.coef
    real = c.is_real and not np.iscomplexobj(marr)
    return CoefField(grid, out.astype(np.complex128), real)


def minus_h_power(grid: SpectralGrid, alpha):
    """Multiplier array for (-H)^alpha, i.e. lam_k^{2 alpha}."""
    return grid.lam2**alpha


def ladder(c: CoefField, direction: int) -> CoefField:
    """Annihilation/creation operators A_{+-i} in coefficient space.

    direction +1/+2 is A_i (coefficient sqrt(2(k_i+1)) c_{k+e_i} at k),
    direction -1/-2 is A_{-i} (coefficient sqrt(2 k_i) c_{k-e_i}).  Modes
    shifted past the cutoff are dropped, so A_{-i} loses the top shell of
    its input; all operators stay endomorphisms of the fixed K x K space.
    """
    if direction not in (1, -1, 2, -2):
        raise ValueError("direction must be one of +1, -1, +2, -2")
    K = c.grid.K
    axis = abs(direction) - 1
    coef = c.coef if axis == 0 else c.coef.T
    out = np.zeros_like(coef)
    idx = np.arange(K)
    if direction > 0:
        out[: K - 1] = np.sqrt(2.0 * (idx[1:K]))[:, None] * coef[1:K]
    else:
        out[1:K] = np.sqrt(2.0 * idx[1:K])[:, None] * coef[: K - 1]
    out = out if axis == 0 else np.ascontiguousarray(out.T)
    return CoefField(c.grid, out, c.is_real)


def derivative_and_position(c: CoefField, which: str) -> CoefField:
    """Spectral d/dx_i and x_i* via the ladder calculus.

    which is one of 'd1', 'd2', 'x1', 'x2'; d_i = (A_i - A_{-i})/2 and
    x_i = (A_i + A_{-i})/2.
    """
    table = {"d1": (1, -1.0), "d2": (2, -1.0), "x1": (1, 1.0), "x2": (2, 1.0)}
    if which not in table:
        raise ValueError(f"unknown operator {which!r}")
    axis, sign = table[which]
    lo = ladder(c, axis)
    hi = ladder(c, -axis)
    return CoefField(c.grid, 0.5 * (lo.coef + sign * hi.coef), c.is_real)


def gradient_l2_sq(c: CoefField):
    """Exact |grad u|_{L2}^2 including the one-shell spill past the cutoff.

    The public ladder() drops modes shifted to index K; this helper keeps the
    extended row/column so the value equals the continuum norm of the
    truncated field.
    """
    K = c.grid.K
    idx = np.arange(K)
    total = 0.0
    for axis in (0, 1):
        a = c.coef if axis == 0 else c.coef.T
        down = np.zeros((K + 1, K), dtype=np.complex128)
        down[: K - 1] = np.sqrt(2.0 * idx[1:K])[:, None] * a[1:K]
        up = np.zeros((K + 1, K), dtype=np.complex128)
        up[1 : K + 1] = np.sqrt(2.0 * (idx + 1))[:, None] * a
        total += float(np.linalg.norm(0.5 * (down - up)) ** 2)
    return total
