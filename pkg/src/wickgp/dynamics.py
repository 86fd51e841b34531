"""Time integration of the renormalized flow at truncation level N.

The v-equation with its transport terms is integrated through the exactly
equivalent u-form obtained from u = v exp(Y_N):

    i du/dt + H u + (xi_N - C_N^2) u + lambda |u|^2 u = 0.

Both split flows are solved exactly: the Hermite phase in coefficient space
and the potential/nonlinear phase node-wise, composed as a Strang step.  The
renormalization enters only as the real potential shift -C_N^2.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .hermite import CoefField, GridField, SpectralGrid, analyze, build_grid, synthesize
from .noise import (
    ExpOverflowError,
    NoiseRealization,
    compute_Y,
    compute_YN,
    compute_counterterm,
    compute_wick,
    exp_weight,
    noise_coef,
    sample_noise,
)
from .observables import ObservableSeries, transformed_energy, transformed_mass
from .spaces import smooth_truncate


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step Strang splitting; t_final < 0 runs the flow backwards."""

    dt: float
    t_final: float
    record_every: int = 10
    scheme: str = "strang"
    sigmas: tuple = (1.6,)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.scheme != "strang":
            raise ValueError("only the strang scheme is provided")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


@dataclass(frozen=True)
class SimState:
    t: float
    u: CoefField
    N: int
    potential: GridField   # V_N = xi_N - C_N^2 sampled at the nodes
    lam: float


def _weighted_transform(v: CoefField, weight_values) -> CoefField:
    return analyze(GridField(v.grid, synthesize(v).values * weight_values))


def u_from_v(v: CoefField, YN: CoefField) -> CoefField:
    """u = v exp(Y_N): grid multiply and re-project onto the basis."""
    if v.grid is not YN.grid:
        raise ValueError("fields must share one grid")
    return _weighted_transform(v, exp_weight(YN, 1.0).field.values)


def v_from_u(u: CoefField, YN: CoefField) -> CoefField:
    """v = u exp(-Y_N), inverse of u_from_v up to the projection error."""
    if u.grid is not YN.grid:
        raise ValueError("fields must share one grid")
    return _weighted_transform(u, exp_weight(YN, -1.0).field.values)


def linear_flow(u: CoefField, tau) -> CoefField:
    """Exact flow of i du/dt + H u = 0: c_k <- exp(-i lam_k^2 tau) c_k."""
    phase = np.exp(-1j * u.grid.lam2 * tau)
    return CoefField(u.grid, phase * u.coef)


def potential_flow(u: CoefField, V: GridField, lam, tau) -> CoefField:
    """Exact flow of i du/dt + V u + lambda |u|^2 u = 0.

    Node-wise phase rotation u <- exp(i tau (V + lambda |u|^2)) u (the modulus
    is invariant along this flow), then re-projection onto the basis.
    """
    vals = synthesize(u).values
    phase = np.exp(1j * tau * (V.values + lam * np.abs(vals) ** 2))
    return analyze(GridField(u.grid, phase * vals))


def strang_step(state: SimState, dt) -> SimState:
    """Half potential, full Hermite phase, half potential."""
    u = potential_flow(state.u, state.potential, state.lam, 0.5 * dt)
    u = linear_flow(u, dt)
    u = potential_flow(u, state.potential, state.lam, 0.5 * dt)
    return replace(state, t=state.t + dt, u=u)


def build_potential(noise: NoiseRealization, N, grid: SpectralGrid, renormalize=True) -> GridField:
    """V_N = xi_N - C_N^2 on the nodes (renormalize=False drops the
    counterterm; diagnostic ablation only)."""
    xi_n = synthesize(smooth_truncate(noise_coef(noise, grid), N)).values.real
    if renormalize:
        xi_n = xi_n - compute_counterterm(N, grid).values
    return GridField(grid, xi_n)


@dataclass
class SimulationResult:
    series: ObservableSeries
    state: SimState
    status: str            # "completed" | "suspected_blowup"
    blowup_time: float | None
    n_steps: int
    YN: CoefField
    snapshots: list        # (t, v coefficient array) pairs when requested


def run_simulation(noise: NoiseRealization, N, v0: CoefField, cfg: IntegratorConfig,
                   lam, renormalize=True, resume_from: SimState | None = None,
                   record=True, snapshot_every=0) -> SimulationResult:
    """Integrate the level-N flow from v0 and record observables in v.

    snapshot_every > 0 additionally stores the v-representation coefficients
    every that many steps (for inter-level gap studies).  Overflow in
    focusing runs is reported as a suspected blow-up (the flow has a blow-up
    alternative), never raised.
    """
    grid = v0.grid
    YN = compute_YN(compute_Y(noise, grid), N)
    wick = compute_wick(noise, N, grid)
    series = ObservableSeries(sigmas=tuple(cfg.sigmas))
    snapshots = []

    try:
        e2 = exp_weight(YN, 2.0).field
        e4 = exp_weight(YN, 4.0).field
        em1 = exp_weight(YN, -1.0).field
        yn_vals = synthesize(YN).values.real
        if resume_from is None:
            state = SimState(t=0.0, u=u_from_v(v0, YN), N=N,
                             potential=build_potential(noise, N, grid, renormalize), lam=lam)
        else:
            state = resume_from
    except ExpOverflowError:
        state = SimState(t=0.0, u=v0, N=N, potential=GridField(grid, np.zeros((grid.Mq, grid.Mq))), lam=lam)
        return SimulationResult(series, state, "suspected_blowup", 0.0, 0, YN, snapshots)

    span = cfg.t_final - state.t
    n_steps = max(1, round(abs(span) / cfg.dt)) if span != 0.0 else 0
    dt_signed = span / n_steps if n_steps else 0.0
    t0 = state.t

    def to_v(st):
        return analyze(GridField(grid, synthesize(st.u).values * em1.values))

    def observe(st, k):
        v = None
        if record and (k % cfg.record_every == 0 or k in (0, n_steps)):
            v = to_v(st)
            mass = transformed_mass(v, YN, e2=e2)
            eb = transformed_energy(v, YN, wick, lam, e2=e2, e4=e4, yn_values=yn_vals)
            series.append(st.t, mass, eb, v)
        if snapshot_every and (k % snapshot_every == 0 or k == n_steps):
            if v is None:
                v = to_v(st)
            snapshots.append((st.t, v.coef))

    observe(state, 0)
    for k in range(1, n_steps + 1):
        state = strang_step(state, dt_signed)
        state = replace(state, t=t0 + k * dt_signed)  # avoid accumulated roundoff in t
        if not np.isfinite(state.u.coef).all():
            return SimulationResult(series, state, "suspected_blowup", state.t, k, YN, snapshots)
        observe(state, k)
    return SimulationResult(series, state, "completed", None, n_steps, YN, snapshots)


CHECKPOINT_FORMAT = "wickgp-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(state: SimState, noise: NoiseRealization, cfg: IntegratorConfig, path):
    """Structured record enabling exact resume; floats round-trip via repr."""
    u = state.u.coef
    inter = np.empty(2 * u.size)
    inter[0::2] = u.real.ravel()
    inter[1::2] = u.imag.ravel()
    record = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "t": state.t,
        "N": state.N,
        "K": state.u.grid.K,
        "Mq": state.u.grid.Mq,
        "seed": noise.seed,
        "stream_index": noise.stream_index,
        "lambda": state.lam,
        "u_interleaved": inter.tolist(),
        "config": {
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "record_every": cfg.record_every,
            "scheme": cfg.scheme,
            "sigmas": list(cfg.sigmas),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path, grid: SpectralGrid | None = None, renormalize=True):
    """Rebuild (state, noise, cfg) from a checkpoint record."""
    with open(path, encoding="utf-8") as fh:
        record = json.load(fh)
    if record.get("format") != CHECKPOINT_FORMAT or record.get("version") != CHECKPOINT_VERSION:
        raise ValueError("not a version-1 checkpoint record")
    K, Mq = record["K"], record["Mq"]
    if grid is None:
        grid = build_grid(K, Mq)
    elif grid.K != K or grid.Mq != Mq:
        raise ValueError("supplied grid does not match the checkpoint")
    inter = np.asarray(record["u_interleaved"])
    coef = (inter[0::2] + 1j * inter[1::2]).reshape(K, K)
    noise = sample_noise(record["seed"], record["stream_index"], K)
    cfgdict = record["config"]
    cfg = IntegratorConfig(dt=cfgdict["dt"], t_final=cfgdict["t_final"],
                           record_every=cfgdict["record_every"], scheme=cfgdict["scheme"],
                           sigmas=tuple(cfgdict["sigmas"]))
    state = SimState(t=record["t"], u=CoefField(grid, coef), N=record["N"],
                     potential=build_potential(noise, record["N"], grid, renormalize),
                     lam=record["lambda"])
    return state, noise, cfg


def default_initial_profile(grid: SpectralGrid) -> CoefField:
    """Normalized ground state plus a 0.3 h_(1,1) perturbation."""
    c = np.zeros((grid.K, grid.K), dtype=np.complex128)
    c[0, 0] = 1.0
    if grid.K > 1:
        c[1, 1] = 0.3
    c /= np.linalg.norm(c)
    return CoefField(grid, c)
