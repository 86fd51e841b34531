"""Hermite-Sobolev norms, the smooth spectral cutoff S_N and related checks.

W^{s,2} norms are exact weighted l2 sums on coefficients.  For q in (2, inf]
the norm is the grid quadrature of the multiplier-transformed field and is an
approximation for anything that is not band-limited; callers label such
values accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hermite import (
    CoefField,
    SpectralGrid,
    apply_spectral_multiplier,
    grid_lq_norm,
    minus_h_power,
    synthesize,
)


@dataclass(frozen=True)
class SobolevIndex:
    """Regularity/integrability pair (s, q) with q = 2 exact on coefficients."""

    s: float
    q: float = 2.0

    @property
    def is_exact(self):
        return self.q == 2.0


def lambda_n_sq(N):
    """Eigenvalue scale lam_N^2 = 2N + 2 of the cutoff level N."""
    return 2.0 * N + 2.0


def bump(r):
    """Smooth cutoff profile: 1 on (-inf, 1/2], 0 on [1, inf), C^inf between.

    Built from f(t) = exp(-1/t) 1_{t>0} as f(1-r) / (f(1-r) + f(r-1/2)).
    """
    r = np.asarray(r, dtype=np.float64)

    def f(t):
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = np.exp(-1.0 / t[pos])
        return out

    hi = f(np.atleast_1d(1.0 - r))
    lo = f(np.atleast_1d(r - 0.5))
    with np.errstate(invalid="ignore"):
        out = np.where(hi + lo > 0, hi / (hi + lo), 0.0)
    out = np.where(np.atleast_1d(r) <= 0.5, 1.0, out)
    out = np.where(np.atleast_1d(r) >= 1.0, 0.0, out)
    return out if np.ndim(r) else float(out[0])


def cutoff_multiplier(grid: SpectralGrid, N):
    """Array chi_{k,N} = chi(lam_k^2 / lam_N^2) on the retained index square."""
    return bump(grid.lam2 / lambda_n_sq(N))


def sobolev_norm(c: CoefField, s, q=2.0):
    """Norm of W^{s,q}: |(-H)^{s/2} u|_{L^q}.

    s may be a SobolevIndex carrying both exponents.  q = 2 is the exact
    coefficient sum (sum lam_k^{2s} |c_k|^2)^{1/2}; for q > 2 the
    multiplier-transformed field is synthesized and measured by quadrature
    (grid max for q = inf), valid as stated only for the band-limited
    representative.
    """
    if isinstance(s, SobolevIndex):
        s, q = s.s, s.q
    if q == 2.0:
        return float(math.sqrt(np.sum(c.grid.lam2**s * np.abs(c.coef) ** 2)))
    shifted = apply_spectral_multiplier(c, minus_h_power(c.grid, s / 2.0))
    return grid_lq_norm(synthesize(shifted), q)


def smooth_truncate(c: CoefField, N) -> CoefField:
    """Apply S_N = chi(-H / lam_N^2): modes with lam_k^2 <= lam_N^2/2 pass
    untouched, modes with lam_k^2 >= lam_N^2 are zeroed."""
    if N < 0:
        raise ValueError("cutoff level N must be >= 0")
    return apply_spectral_multiplier(c, cutoff_multiplier(c.grid, N))


def duality_bracket(T: CoefField, phi: CoefField):
    """Real pairing Re integral T conj(phi), evaluated in Parseval form."""
    if T.grid is not phi.grid:
        raise ValueError("fields must share one grid")
    return float(np.sum(T.coef * np.conj(phi.coef)).real)


@dataclass(frozen=True)
class TruncationReport:
    """Ratios of the two-sided cutoff estimates (<= 1 when they hold)."""

    low_ratio: float      # |S_N c|_{a+s,2} / (lam_N^s |c|_{a,2})
    high_ratio: float     # |c - S_N c|_{a,2} / (lam_{N//2}^{-s} |c|_{a+s,2})
    vacuous: bool

    @property
    def passed(self):
        return self.vacuous or (self.low_ratio <= 1.0 + 1e-12 and self.high_ratio <= 1.0 + 1e-12)


def check_truncation_estimates(c: CoefField, N, s, alpha=0.0) -> TruncationReport:
    """Verify |S_N c|_{W^{a+s,2}} <= lam_N^s |c|_{W^{a,2}} and
    |c - S_N c|_{W^{a,2}} <= lam_{floor(N/2)}^{-s} |c|_{W^{a+s,2}} with C = 1."""
    if s <= 0:
        raise ValueError("the estimates require s > 0")
    base = sobolev_norm(c, alpha)
    high = sobolev_norm(c, alpha + s)
    if base == 0.0 and high == 0.0:
        return TruncationReport(0.0, 0.0, vacuous=True)
    cN = smooth_truncate(c, N)
    gap = c.copy_with(c.coef - cN.coef)
    low_ratio = sobolev_norm(cN, alpha + s) / (lambda_n_sq(N) ** (s / 2.0) * base) if base else 0.0
    high_ratio = sobolev_norm(gap, alpha) / (lambda_n_sq(N // 2) ** (-s / 2.0) * high) if high else 0.0
    return TruncationReport(float(low_ratio), float(high_ratio), vacuous=False)


@dataclass(frozen=True)
class InterpolationReport:
    ratio: float          # |c|_{sigma,2} / (|c|_{2,2}^{sigma/2} |c|_{0,2}^{1-sigma/2})
    vacuous: bool

    @property
    def passed(self):
        return self.vacuous or self.ratio <= 1.0 + 1e-12


def interpolation_check(c: CoefField, sigma) -> InterpolationReport:
    """Log-convexity of s -> |c|_{W^{s,2}}: interpolation between L^2 and W^{2,2}."""
    if not 0.0 < sigma < 2.0:
        raise ValueError("sigma must lie in (0, 2)")
    lo = sobolev_norm(c, 0.0)
    hi = sobolev_norm(c, 2.0)
    if lo == 0.0:
        return InterpolationReport(0.0, vacuous=True)
    mid = sobolev_norm(c, sigma)
    return InterpolationReport(float(mid / (hi ** (sigma / 2.0) * lo ** (1.0 - sigma / 2.0))), False)
