"""Seeded white-noise realizations, the smoothed potentials Y_N, the
counterterm C_N^2 and the renormalized square :|grad Y_N|^2:.

The noise is xi = sum_k xi_k h_k with i.i.d. standard normal coordinates on
the retained K x K mode square; everything derived from a realization is a
pure function of (seed, stream_index, K, N, grid).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .hermite import CoefField, GridField, SpectralGrid, synthesize
from .spaces import cutoff_multiplier, smooth_truncate

EXP_ARG_LIMIT = 700.0  # exp overflow guard on a * max|Y_N|


class ExpOverflowError(FloatingPointError):
    """A requested exponential weight exceeds double range: the realization is
    pathological at this resolution and the caller must handle it."""


@dataclass(frozen=True)
class NoiseRealization:
    """White-noise coordinates xi_k for one (seed, stream_index) pair."""

    seed: int
    stream_index: int
    K: int
    xi: np.ndarray  # (K, K) float64, row-major draw order

    def __post_init__(self):
        if self.xi.shape != (self.K, self.K):
            raise ValueError("coordinate array does not match the cutoff")


def sample_noise(seed, stream_index, K) -> NoiseRealization:
    """Draw the K x K standard-normal coordinate array.

    Streams use the counter-based Philox generator keyed through
    SeedSequence(seed, spawn_key=(stream_index,)), numpy's documented
    splitting hash, so distinct stream indices give independent streams and
    regeneration is bit-identical.
    """
    if K < 1:
        raise ValueError("cutoff K must be >= 1")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream_index),))
    gen = np.random.Generator(np.random.Philox(ss))
    xi = gen.standard_normal((K, K))
    xi.setflags(write=False)
    return NoiseRealization(seed=int(seed), stream_index=int(stream_index), K=int(K), xi=xi)


def _xi_checksum(xi):
    return hashlib.sha256(np.ascontiguousarray(xi, dtype="<f8").tobytes()).hexdigest()


def dump_realization(noise: NoiseRealization, path):
    """Write a self-describing JSON record for cross-implementation comparison."""
    record = {
        "format": "wickgp-noise-realization",
        "version": 1,
        "seed": noise.seed,
        "stream_index": noise.stream_index,
        "K": noise.K,
        "xi": [[repr(float(v)) for v in row] for row in noise.xi],
        "sha256": _xi_checksum(noise.xi),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_realization(path) -> NoiseRealization:
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    if record.get("format") != "wickgp-noise-realization" or record.get("version") != 1:
        raise ValueError("not a version-1 noise realization record")
    xi = np.array([[float(v) for v in row] for row in record["xi"]], dtype=np.float64)
    if _xi_checksum(xi) != record["sha256"]:
        raise ValueError("realization checksum mismatch")
    xi.setflags(write=False)
    return NoiseRealization(seed=record["seed"], stream_index=record["stream_index"], K=record["K"], xi=xi)


def noise_coef(noise: NoiseRealization, grid: SpectralGrid) -> CoefField:
    """The realization xi as a coefficient field on its grid."""
    if grid.K != noise.K:
        raise ValueError("grid cutoff does not match the realization")
    return CoefField(grid, noise.xi.astype(np.complex128), is_real=True)


def compute_Y(noise: NoiseRealization, grid: SpectralGrid) -> CoefField:
    """Y = (-H)^{-1} xi, i.e. Y_k = xi_k / lam_k^2."""
    if grid.K != noise.K:
        raise ValueError("grid cutoff does not match the realization")
    return CoefField(grid, (noise.xi / grid.lam2).astype(np.complex128), is_real=True)


def check_level(grid: SpectralGrid, N):
    """Reject levels whose cutoff support would leave the retained square."""
    if N < 0:
        raise ValueError("level N must be >= 0")
    if N > grid.K - 1:
        raise ValueError(
            f"level N={N} is under-resolved on a K={grid.K} basis; need N <= K-1"
        )


def compute_YN(Y: CoefField, N) -> CoefField:
    """Smoothly truncated potential Y_N = S_N Y."""
    check_level(Y.grid, N)
    return smooth_truncate(Y, N)


def compute_counterterm(N, grid: SpectralGrid) -> GridField:
    """Deterministic counterterm C_N^2(x) = sum_k chi_{k,N}^2 |grad h_k(x)|^2 / lam_k^4.

    Cached per (N, grid); this is the one expensive deterministic object and
    is shared read-only across realizations.
    """
    check_level(grid, N)

    def build():
        m = cutoff_multiplier(grid, N) ** 2 / grid.lam2**2
        K = grid.K
        p = grid.psi[:K] ** 2        # psi_n(x_i)^2
        d = grid.dpsi**2             # psi_n'(x_i)^2
        vals = d.T @ m @ p + p.T @ m @ d
        vals.setflags(write=False)
        return GridField(grid, vals)

    return grid.cached(("counterterm", N), build)


@dataclass(frozen=True)
class WickField:
    """Renormalized potential data at one truncation level."""

    N: int
    grad_YN: tuple        # (GridField, GridField): d1 Y_N, d2 Y_N
    counterterm: GridField
    wick: GridField       # |grad Y_N|^2 - C_N^2


def compute_wick(noise: NoiseRealization, N, grid: SpectralGrid) -> WickField:
    """Assemble grad Y_N spectrally, square on the grid and subtract C_N^2."""
    from .hermite import derivative_and_position

    YN = compute_YN(compute_Y(noise, grid), N)
    g1 = synthesize(derivative_and_position(YN, "d1"))
    g2 = synthesize(derivative_and_position(YN, "d2"))
    ct = compute_counterterm(N, grid)
    raw = g1.values.real**2 + g2.values.real**2
    return WickField(
        N=N,
        grad_YN=(GridField(grid, g1.values.real), GridField(grid, g2.values.real)),
        counterterm=ct,
        wick=GridField(grid, raw - ct.values),
    )


@dataclass(frozen=True)
class ExpWeight:
    """Node-wise exponential weight exp(a Y_N) with its grid extrema."""

    field: GridField
    max: float
    min: float


def exp_weight(YN: CoefField, a) -> ExpWeight:
    """exp(a Y_N) at the nodes; fails loudly when a max|Y_N| would overflow."""
    vals = synthesize(YN).values.real
    peak = float(np.abs(vals).max())
    if abs(a) * peak > EXP_ARG_LIMIT:
        raise ExpOverflowError(
            f"exp({a} * Y_N) overflows: a*max|Y_N| = {abs(a) * peak:.3g} > {EXP_ARG_LIMIT}"
        )
    w = np.exp(a * vals)
    return ExpWeight(field=GridField(YN.grid, w), max=float(w.max()), min=float(w.min()))
