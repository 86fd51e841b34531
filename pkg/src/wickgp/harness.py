"""Configuration-driven Monte Carlo studies: convergence rates in the
truncation level, renormalization Cauchy rates, inequality audits and the
focusing gate, with deterministic CSV/JSON emission.

Every study is a pure function of its config (seed included): reruns produce
byte-identical outputs.  All noise levels inside one realization share a
single coordinate draw, which is what makes the inter-level gaps Cauchy.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import IntegratorConfig, default_initial_profile, run_simulation, save_checkpoint
from .hermite import (
    CoefField,
    GridField,
    analyze,
    apply_spectral_multiplier,
    build_grid,
    derivative_and_position,
    minus_h_power,
    synthesize,
)
from .noise import compute_Y, compute_YN, compute_counterterm, compute_wick, exp_weight, sample_noise
from .observables import check_brezis_gallouet, check_gagliardo_nirenberg, focusing_event_predicate
from .spaces import lambda_n_sq, sobolev_norm

STUDY_KINDS = (
    "simulate",
    "converge_N",
    "noise_rates",
    "wick_rates",
    "diverging_bound",
    "inequalities",
    "focusing_gate",
)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    K: int = 48
    Mq: int = 0                      # 0 means 2K
    N_list: tuple = (8, 12, 16, 24, 32)
    realizations: int = 100
    seed: int = 2024
    lam: float = 0.0
    dt: float = 1e-3
    t_final: float = 1.0
    record_every: int = 10
    snapshot_every: int = 10
    sigma_list: tuple = (1.6,)
    s: float = 0.9
    s_prime: float = 0.35
    q: float = 4.0
    p: float = 2.0
    kappa: float = 0.5
    a_exp: float = 2.0
    L: float = 0.1
    delta0: float = 0.2
    run_failing: bool = False
    zero_noise: bool = False         # diagnostic: xi = 0 and no counterterm (level-independent flow)
    threads: int = 1
    output_path: str = "out"

    def __post_init__(self):
        if self.kind not in STUDY_KINDS:
            raise ValueError(f"unknown study kind {self.kind!r}")
        if self.realizations < 1:
            raise ValueError("need at least one realization")
        nl = tuple(self.N_list)
        if any(b <= a for a, b in zip(nl, nl[1:])):
            raise ValueError("N_list must be strictly increasing")
        if nl and max(nl) > self.K - 1:
            raise ValueError("max(N_list) must be <= K-1")
        object.__setattr__(self, "N_list", nl)
        object.__setattr__(self, "sigma_list", tuple(self.sigma_list))

    @property
    def mq(self):
        return self.Mq if self.Mq else 2 * self.K

    def integrator(self):
        return IntegratorConfig(dt=self.dt, t_final=self.t_final,
                                record_every=self.record_every, sigmas=self.sigma_list)


# per-kind desk-scale defaults, matching the quantitative studies they back
DEFAULTS = {
    "simulate": dict(K=48, N_list=(16,), realizations=1, lam=0.0, dt=1e-3, t_final=1.0),
    "converge_N": dict(K=48, N_list=(8, 12, 16, 24, 32), realizations=8, lam=0.0,
                       dt=2e-3, t_final=1.0, snapshot_every=10, p=2.0),
    "noise_rates": dict(K=96, N_list=(8, 16, 32, 64), realizations=500,
                        s=0.6, s_prime=0.35, q=8.0, kappa=0.5, a_exp=2.0),
    "wick_rates": dict(K=96, N_list=(8, 16, 32, 64), realizations=300,
                       q=4.0, s=0.9, delta0=0.2),
    "diverging_bound": dict(K=48, N_list=(8, 12, 16, 24, 32), realizations=6, lam=0.0,
                            dt=2e-3, t_final=1.0, sigma_list=(1.6,), p=2.0),
    "inequalities": dict(K=24, realizations=1000, N_list=(4,), lam=-1.0, dt=2e-3, t_final=0.3),
    "focusing_gate": dict(K=48, N_list=(12,), realizations=100, lam=1.0, L=0.1,
                          dt=2e-3, t_final=1.0),
}


def default_config(kind, **overrides):
    base = dict(DEFAULTS.get(kind, {}))
    base.update(overrides)
    return ExperimentConfig(kind=kind, **base)


_FIELD_ALIASES = {"lambda": "lam", "R": "realizations"}


def parse_config_file(path):
    """Flat key=value file; '#' starts a comment; unknown keys are rejected."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            key = _FIELD_ALIASES.get(key, key)
            if key not in fields:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = _parse_value(fields[key], val, f"{path}:{lineno}")
    return out


def _parse_value(fielddef, text, where):
    tname = fielddef.type
    try:
        if tname == "int":
            return int(text)
        if tname == "float":
            return float(text)
        if tname == "bool":
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if tname == "tuple":
            items = [t for t in text.replace("(", "").replace(")", "").split(",") if t.strip()]
            if fielddef.name == "sigma_list":
                return tuple(float(t) for t in items)
            return tuple(int(t) for t in items)
        return text
    except ValueError as exc:
        raise ValueError(f"{where}: cannot parse {text!r} for key {fielddef.name!r}") from exc


@dataclass(frozen=True)
class RateFit:
    xs: tuple          # log lambda_N
    ys: tuple          # log quantity
    slope: float
    intercept: float
    residual: float    # rms residual of the fit, reported alongside the slope

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "residual": self.residual, "n_points": len(self.xs)}


def fit_rate(points) -> RateFit:
    """Ordinary least squares of log(value) against log(lambda_N)."""
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("a rate fit needs at least 3 points")
    if any(v <= 0 for _, v in pts):
        raise ValueError("rate fit requires positive values")
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return RateFit(xs=tuple(x), ys=tuple(y), slope=float(coef[0]), intercept=float(coef[1]),
                   residual=float(math.sqrt(float(np.mean(resid**2)))))


def moment(values, p):
    arr = np.asarray(values, dtype=np.float64)
    return float(np.mean(arr**p) ** (1.0 / p))


@dataclass
class StudyResult:
    kind: str
    config: ExperimentConfig
    summary: dict
    tables: dict = field(default_factory=dict)   # name -> (header, rows)

    @property
    def passed(self):
        return all(self.summary.get("assertions", {}).values())

    def write(self, outdir):
        os.makedirs(outdir, exist_ok=True)
        payload = {
            "kind": self.kind,
            "config": _config_dict(self.config),
            "passed": self.passed,
            **self.summary,
        }
        with open(os.path.join(outdir, f"{self.kind}_summary.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        for name, (header, rows) in self.tables.items():
            with open(os.path.join(outdir, f"{self.kind}_{name}.csv"), "w", encoding="utf-8", newline="\n") as fh:
                fh.write(",".join(header) + "\n")
                for row in rows:
                    fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _config_dict(cfg):
    # execution details (worker count, output location) are not part of the
    # scientific payload and stay out of the echoed config
    d = dataclasses.asdict(cfg)
    d["N_list"] = list(d["N_list"])
    d["sigma_list"] = list(d["sigma_list"])
    d.pop("threads", None)
    d.pop("output_path", None)
    return d


def _map_ordered(fn, items, threads):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _neg_inf_vector_norm(c1: CoefField, c2: CoefField, kappa):
    """Grid L^inf of the Euclidean magnitude of ((-H)^{-kappa/2} f_1, ... f_2)."""
    m = minus_h_power(c1.grid, -kappa / 2.0)
    g1 = synthesize(apply_spectral_multiplier(c1, m)).values
    g2 = synthesize(apply_spectral_multiplier(c2, m)).values
    return float(np.sqrt(np.abs(g1) ** 2 + np.abs(g2) ** 2).max())


# ---------------------------------------------------------------------------
# noise rate study

def study_noise_rates(cfg: ExperimentConfig) -> StudyResult:
    """Gap rates for Y_N -> Y, its gradient/position companions and the
    exponential weights, against the level scale lambda_N."""
    if cfg.realizations < 100:
        raise ValueError("noise rate moments need at least 100 realizations")
    grid = build_grid(cfg.K, cfg.mq)
    Ns = cfg.N_list
    quantities = ("y_gap", "grad_gap", "x_gap", "exp_gap", "grad_linf")

    def one(r):
        Y = compute_Y(sample_noise(cfg.seed, r, cfg.K), grid)
        exp_full = exp_weight(Y, cfg.a_exp).field.values
        row = {}
        for N in Ns:
            YN = compute_YN(Y, N)
            gap = Y.copy_with(Y.coef - YN.coef)
            row[("y_gap", N)] = sobolev_norm(gap, 1.0 - cfg.s, cfg.q)
            row[("grad_gap", N)] = _neg_inf_vector_norm(
                derivative_and_position(gap, "d1"), derivative_and_position(gap, "d2"), cfg.kappa)
            row[("x_gap", N)] = _neg_inf_vector_norm(
                derivative_and_position(gap, "x1"), derivative_and_position(gap, "x2"), cfg.kappa)
            row[("exp_gap", N)] = float(np.abs(exp_weight(YN, cfg.a_exp).field.values - exp_full).max())
            row[("grad_linf", N)] = _neg_inf_vector_norm(
                derivative_and_position(YN, "d1"), derivative_and_position(YN, "d2"), 0.0)
        return row

    rows = _map_ordered(one, range(cfg.realizations), cfg.threads)

    fits, table_rows = {}, []
    for N in Ns:
        lam_n = math.sqrt(lambda_n_sq(N))
        rec = [N, lam_n]
        for qty in quantities:
            vals = [row[(qty, N)] for row in rows]
            rec.extend([moment(vals, 2.0), moment(vals, 4.0)])
        table_rows.append(rec)
    header = ["N", "lambda_N"] + [f"{q}_{tag}" for q in quantities for tag in ("p2", "p4")]

    for qty in quantities:
        for ptag, pval in (("p2", 2.0), ("p4", 4.0)):
            pts = [(math.sqrt(lambda_n_sq(N)), moment([row[(qty, N)] for row in rows], pval)) for N in Ns]
            if max(v for _, v in pts) == 0.0:
                fits[f"{qty}_{ptag}"] = None   # identically-zero gap (a_exp = 0)
            else:
                fits[f"{qty}_{ptag}"] = fit_rate(pts).as_dict()

    target = -(cfg.s - cfg.s_prime) + 0.1
    slope_p2 = fits["y_gap_p2"]["slope"]
    slope_p4 = fits["y_gap_p4"]["slope"]
    assertions = {
        "y_gap_slope_within_admissible": slope_p2 <= target,
        "moment_orders_agree": abs(slope_p2 - slope_p4) <= 0.1,
        "grad_gap_decays": fits["grad_gap_p2"]["slope"] < 0.0,
        "x_gap_decays": fits["x_gap_p2"]["slope"] < 0.0,
        "exp_gap_decays": fits["exp_gap_p2"] is None or fits["exp_gap_p2"]["slope"] < 0.0,
    }
    summary = {
        "assertions": assertions,
        "fits": fits,
        "target_slope": target,
        "grad_linf_growth_slope": fits["grad_linf_p2"]["slope"],  # reported, not asserted
        "norm_labels": {"y_gap": f"W^{{{1.0 - cfg.s:g},{cfg.q:g}}} grid approximation"},
        "failed_realizations": 0,
    }
    return StudyResult("noise_rates", cfg, summary, {"levels": (header, table_rows)})


# ---------------------------------------------------------------------------
# Wick rate study

def _neg_sobolev_grid_norm(vals: GridField, s, q):
    """W^{-s,q} of a grid field through its band-limited representative."""
    c = analyze(vals)
    return sobolev_norm(c, -s, q)


def study_wick_rates(cfg: ExperimentConfig) -> StudyResult:
    """Cauchy rate of the renormalized squares between consecutive levels,
    plus the no-counterterm ablation."""
    if cfg.realizations < 100:
        raise ValueError("wick rate moments need at least 100 realizations")
    if len(cfg.N_list) < 4:
        raise ValueError("consecutive-pair fits need at least 4 levels (3 points)")
    admissible = 2.0 * cfg.s / 3.0 - 4.0 / (3.0 * cfg.q)
    if not 0.0 < cfg.delta0 < admissible:
        raise ValueError(f"delta0 must sit inside (0, {admissible:.4f})")
    grid = build_grid(cfg.K, cfg.mq)
    pairs = list(zip(cfg.N_list[:-1], cfg.N_list[1:]))
    for N in cfg.N_list:
        compute_counterterm(N, grid)  # warm the shared cache before dispatch

    def one(r):
        noise = sample_noise(cfg.seed, r, cfg.K)
        fields = {N: compute_wick(noise, N, grid) for N in cfg.N_list}
        out = {}
        for M, N in pairs:
            wick_gap = GridField(grid, fields[N].wick.values - fields[M].wick.values)
            raw_gap = GridField(
                grid,
                (fields[N].wick.values + fields[N].counterterm.values)
                - (fields[M].wick.values + fields[M].counterterm.values),
            )
            out[("wick", M)] = _neg_sobolev_grid_norm(wick_gap, cfg.s, cfg.q)
            out[("raw", M)] = _neg_sobolev_grid_norm(raw_gap, cfg.s, cfg.q)
        return out

    rows = _map_ordered(one, range(cfg.realizations), cfg.threads)

    table_rows = []
    wick_pts, raw_pts = [], []
    for M, N in pairs:
        lam_m = math.sqrt(lambda_n_sq(M))
        wick_m = moment([row[("wick", M)] for row in rows], cfg.q)
        raw_m = moment([row[("raw", M)] for row in rows], cfg.q)
        wick_pts.append((lam_m, wick_m))
        raw_pts.append((lam_m, raw_m))
        table_rows.append([M, N, lam_m, wick_m, raw_m])

    wick_fit = fit_rate(wick_pts)
    raw_fit = fit_rate(raw_pts)
    counterterm_peaks = [(N, float(compute_counterterm(N, grid).values.max())) for N in cfg.N_list]
    assertions = {
        "wick_slope_at_most_minus_delta0": wick_fit.slope <= -cfg.delta0,
        "ablation_slope_strictly_larger": raw_fit.slope > wick_fit.slope,
    }
    summary = {
        "assertions": assertions,
        "fits": {"wick": wick_fit.as_dict(), "raw_ablation": raw_fit.as_dict()},
        "admissible_upper_delta": admissible,
        "delta0": cfg.delta0,
        "norm_label": f"W^{{-{cfg.s:g},{cfg.q:g}}} grid approximation",
        "counterterm_grid_max": {str(n): v for n, v in counterterm_peaks},
        "failed_realizations": 0,
    }
    return StudyResult(
        "wick_rates", cfg, summary,
        {"gaps": (["M", "N", "lambda_M", "wick_gap_moment", "raw_gap_moment"], table_rows)},
    )


# ---------------------------------------------------------------------------
# solution convergence / diverging bound studies

def _coupled_runs(cfg, v0, r):
    """Integrate all levels of one realization from a single coordinate draw."""
    noise = sample_noise(cfg.seed, r, cfg.K)
    if cfg.zero_noise:
        noise = dataclasses.replace(noise, xi=np.zeros_like(noise.xi))
    icfg = cfg.integrator()
    runs = {}
    for N in cfg.N_list:
        runs[N] = run_simulation(noise, N, v0, icfg, lam=cfg.lam, record=False,
                                 snapshot_every=cfg.snapshot_every,
                                 renormalize=not cfg.zero_noise)
    return runs


def study_converge_N(cfg: ExperimentConfig) -> StudyResult:
    """sup_t L^2 gaps between consecutive levels driven by coupled noise."""
    if len(cfg.N_list) < 4:
        raise ValueError("consecutive-pair fits need at least 4 levels (3 points)")
    grid = build_grid(cfg.K, cfg.mq)
    v0 = default_initial_profile(grid)
    pairs = list(zip(cfg.N_list[:-1], cfg.N_list[1:]))
    for N in cfg.N_list:
        compute_counterterm(N, grid)

    def one(r):
        runs = _coupled_runs(cfg, v0, r)
        if any(res.status != "completed" for res in runs.values()):
            return {"failed": True}
        gaps = {}
        for M, N in pairs:
            snapsM = runs[M].snapshots
            snapsN = runs[N].snapshots
            sup = max(float(np.linalg.norm(a[1] - b[1])) for a, b in zip(snapsM, snapsN))
            gaps[M] = sup
        return {"failed": False, "gaps": gaps}

    rows = _map_ordered(one, range(cfg.realizations), cfg.threads)
    ok = [row for row in rows if not row["failed"]]
    n_failed = len(rows) - len(ok)

    all_gaps = np.array([[row["gaps"][M] for M, _ in pairs] for row in ok])
    degenerate = bool(all_gaps.size and all_gaps.max() < 1e-9)
    table_rows, pts = [], []
    monotone_frac = 0.0
    fit_dict = None
    if ok and not degenerate:
        for j, (M, N) in enumerate(pairs):
            lam_m = math.sqrt(lambda_n_sq(M))
            gm = moment(all_gaps[:, j], cfg.p)
            stderr = float(all_gaps[:, j].std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0
            pts.append((lam_m, gm))
            table_rows.append([M, N, lam_m, gm, stderr])
        fit = fit_rate(pts)
        fit_dict = fit.as_dict()
        monotone = np.all(np.diff(all_gaps, axis=1) < 0.0, axis=1)
        monotone_frac = float(np.mean(monotone))
    assertions = {
        "fit_valid": degenerate or (n_failed <= 0.1 * cfg.realizations and fit_dict is not None),
        "gap_slope_negative": degenerate or (fit_dict is not None and fit_dict["slope"] < 0.0),
    }
    summary = {
        "assertions": assertions,
        "degenerate": degenerate,
        "fit": fit_dict,
        "monotone_fraction": monotone_frac,
        "mean_gap_stderr": {str(M): row[4] for row, (M, _) in zip(table_rows, pairs)} if table_rows else {},
        "failed_realizations": n_failed,
        "moment_order_p": cfg.p,
    }
    return StudyResult("converge_N", cfg, summary,
                       {"gaps": (["M", "N", "lambda_M", "gap_moment", "gap_mean_stderr"], table_rows)})


def study_diverging_bound(cfg: ExperimentConfig) -> StudyResult:
    """Growth of sup_t W^{2,2} (linear) and W^{sigma,2} (cubic) norms in N."""
    if len(cfg.N_list) < 3:
        raise ValueError("need at least 3 levels for a rate study")
    grid = build_grid(cfg.K, cfg.mq)
    v0 = default_initial_profile(grid)
    sigma = cfg.sigma_list[0]
    for N in cfg.N_list:
        compute_counterterm(N, grid)

    def one(r):
        runs = _coupled_runs(cfg, v0, r)
        if any(res.status != "completed" for res in runs.values()):
            return {"failed": True}
        out = {}
        for N, res in runs.items():
            w22 = [(sobolev_norm(CoefField(grid, c), 2.0), t) for t, c in res.snapshots]
            wsig = [(sobolev_norm(CoefField(grid, c), sigma), t) for t, c in res.snapshots]
            out[N] = {
                "sup_w22": max(w22)[0], "arg_w22": max(w22)[1],
                "sup_wsig": max(wsig)[0], "arg_wsig": max(wsig)[1],
            }
        return {"failed": False, "sup": out}

    rows = _map_ordered(one, range(cfg.realizations), cfg.threads)
    ok = [row for row in rows if not row["failed"]]
    n_failed = len(rows) - len(ok)

    table_rows, pts22, ptssig = [], [], []
    args_in_range = True
    lo, hi = sorted((0.0, cfg.t_final))
    for N in cfg.N_list:
        lam_n = math.sqrt(lambda_n_sq(N))
        m22 = moment([row["sup"][N]["sup_w22"] for row in ok], cfg.p)
        msig = moment([row["sup"][N]["sup_wsig"] for row in ok], cfg.p)
        pts22.append((lam_n, m22))
        ptssig.append((lam_n, msig))
        for row in ok:
            args_in_range &= lo <= row["sup"][N]["arg_w22"] <= hi
        table_rows.append([N, lam_n, m22, msig])

    spread22 = max(v for _, v in pts22) / min(v for _, v in pts22) - 1.0
    degenerate = spread22 < 1e-9
    fit22 = fit_rate(pts22)
    fitsig = fit_rate(ptssig)
    assertions = {
        "fit_valid": n_failed <= 0.1 * cfg.realizations,
        "w22_growth_below_policy": degenerate or fit22.slope < 0.5,
        "wsigma_growth_below_policy": degenerate or fitsig.slope < 0.5,
        "argmax_times_in_horizon": args_in_range,
    }
    summary = {
        "assertions": assertions,
        "degenerate": degenerate,
        "fits": {"sup_w22": fit22.as_dict(), "sup_wsigma": fitsig.as_dict()},
        "sigma": sigma,
        "failed_realizations": n_failed,
    }
    return StudyResult("diverging_bound", cfg, summary,
                       {"levels": (["N", "lambda_N", "sup_w22_moment", "sup_wsigma_moment"], table_rows)})


# ---------------------------------------------------------------------------
# inequality audits

def _inequality_corpus(grid, R, seed, extra_fields=()):
    from .hermite import hermite_1d

    fields = []
    # coherent origin-peaked profiles: the near-extremal shapes for the
    # log-interpolation bound, with K-convergent constants
    psi0 = np.array([hermite_1d(n, 0.0) for n in range(grid.K)])
    hk0 = np.outer(psi0, psi0)
    for a in (0.75, 1.0, 1.25, 1.5):
        for scale in (0.1, 1.0, 10.0):
            fields.append(CoefField(grid, (scale * hk0 * grid.lam2**-a).astype(np.complex128)))
    for i in range(R):
        rng = np.random.default_rng(seed + i)
        decay = (0.6, 1.0, 1.5, 2.0)[i % 4]
        c = rng.standard_normal((grid.K, grid.K)) + 1j * rng.standard_normal((grid.K, grid.K))
        scale = (0.1, 1.0, 10.0)[i % 3]
        fields.append(CoefField(grid, scale * c * grid.lam2 ** (-decay / 2.0)))
    return fields + list(extra_fields)


def study_inequalities(cfg: ExperimentConfig) -> StudyResult:
    """Quartic-norm and log-interpolation inequality audits over a random
    corpus plus trajectory snapshots, with a basis-doubling stability check."""
    grid = build_grid(cfg.K, cfg.mq)
    sigma = max(cfg.sigma_list[0], 1.1)

    noise = sample_noise(cfg.seed, 0, cfg.K)
    icfg = cfg.integrator()
    res = run_simulation(noise, cfg.N_list[0], default_initial_profile(grid), icfg,
                         lam=cfg.lam, record=False, snapshot_every=cfg.snapshot_every)
    traj = [CoefField(grid, c) for _, c in res.snapshots[:20]]

    corpus = _inequality_corpus(grid, cfg.realizations, cfg.seed + 1, traj)
    gn_ratios = [check_gagliardo_nirenberg(v).ratio for v in corpus]
    gn_violations = sum(r > 1.0 + 1e-8 for r in gn_ratios)
    bg_const = max(check_brezis_gallouet(v, sigma).constant for v in corpus)

    # the same corpus recipe on the doubled basis
    grid2 = build_grid(2 * cfg.K, 2 * cfg.mq)
    corpus2 = _inequality_corpus(grid2, cfg.realizations, cfg.seed + 1)
    bg_const2 = max(check_brezis_gallouet(v, sigma).constant for v in corpus2)
    bg_drift = abs(bg_const2 - bg_const) / bg_const

    assertions = {
        "no_gn_violations": gn_violations == 0,
        "bg_constant_stable_under_refinement": bg_drift <= 0.2,
    }
    summary = {
        "assertions": assertions,
        "gn_max_ratio": max(gn_ratios),
        "gn_violations": int(gn_violations),
        "corpus_size": len(corpus),
        "bg_constant": bg_const,
        "bg_constant_refined": bg_const2,
        "bg_relative_drift": bg_drift,
        "sigma": sigma,
        "failed_realizations": 0,
    }
    hist_rows = [[i, r] for i, r in enumerate(gn_ratios)]
    return StudyResult("inequalities", cfg, summary, {"gn_ratios": (["index", "ratio"], hist_rows)})


# ---------------------------------------------------------------------------
# focusing gate

def study_focusing_gate(cfg: ExperimentConfig) -> StudyResult:
    """Evaluate the smallness event per realization and integrate the cubic
    focusing flow on the passing set."""
    if cfg.lam <= 0:
        raise ValueError("the focusing gate needs lambda > 0")
    grid = build_grid(cfg.K, cfg.mq)
    N = cfg.N_list[-1]
    compute_counterterm(N, grid)
    profile = default_initial_profile(grid)
    v0 = CoefField(grid, cfg.L * profile.coef)  # initial L2 norm exactly L
    icfg = cfg.integrator()

    def one(r):
        noise = sample_noise(cfg.seed, r, cfg.K)
        Y = compute_Y(noise, grid)
        gate = focusing_event_predicate(Y, cfg.lam, cfg.L)
        rec = {"r": r, "value": gate.value, "margin": gate.margin, "gate_passed": gate.passed,
               "ran": False, "sigma_ratio": float("nan"), "status": ""}
        if gate.passed or cfg.run_failing:
            res = run_simulation(noise, N, v0, icfg, lam=cfg.lam, record=False,
                                 snapshot_every=cfg.snapshot_every)
            sig0 = sobolev_norm(CoefField(grid, res.snapshots[0][1]), 1.0)
            sigmax = max(sobolev_norm(CoefField(grid, c), 1.0) for _, c in res.snapshots)
            rec.update(ran=True, sigma_ratio=sigmax / sig0, status=res.status)
        return rec

    rows = _map_ordered(one, range(cfg.realizations), cfg.threads)
    pass_frac = float(np.mean([row["gate_passed"] for row in rows]))
    ran_pass = [row for row in rows if row["gate_passed"] and row["ran"]]
    bounded_all = all(row["status"] == "completed" and row["sigma_ratio"] < 10.0 for row in ran_pass)
    blowups = sum(row["ran"] and row["status"] != "completed" for row in rows)

    assertions = {
        "passing_runs_sigma_bounded": bounded_all,
    }
    summary = {
        "assertions": assertions,
        "gate_pass_fraction": pass_frac,
        "max_sigma_ratio_on_passing": max((row["sigma_ratio"] for row in ran_pass), default=0.0),
        "suspected_blowups": int(blowups),
        "failed_realizations": int(blowups),
        "level": N,
    }
    table = [[row["r"], row["value"], row["margin"], row["gate_passed"], row["ran"],
              row["sigma_ratio"], row["status"]] for row in rows]
    return StudyResult("focusing_gate", cfg, summary,
                       {"realizations": (["r", "value", "margin", "gate_passed", "ran", "sigma_ratio", "status"], table)})


# ---------------------------------------------------------------------------
# single simulation

def study_simulate(cfg: ExperimentConfig) -> StudyResult:
    grid = build_grid(cfg.K, cfg.mq)
    N = cfg.N_list[-1]
    noise = sample_noise(cfg.seed, 0, cfg.K)
    res = run_simulation(noise, N, default_initial_profile(grid), cfg.integrator(), lam=cfg.lam)
    os.makedirs(cfg.output_path, exist_ok=True)
    res.series.write_csv(os.path.join(cfg.output_path, "simulate_observables.csv"))
    save_checkpoint(res.state, noise, cfg.integrator(), os.path.join(cfg.output_path, "simulate_final_checkpoint.json"))
    m = np.array(res.series.mass)
    e = np.array(res.series.energy)
    summary = {
        "assertions": {"completed": res.status == "completed"},
        "status": res.status,
        "level": N,
        "mass_drift": float(np.abs(m - m[0]).max() / abs(m[0])) if len(m) else float("nan"),
        "energy_drift": float(np.abs(e - e[0]).max() / max(abs(e[0]), 1e-30)) if len(e) else float("nan"),
        "failed_realizations": 0 if res.status == "completed" else 1,
    }
    return StudyResult("simulate", cfg, summary)


_RUNNERS = {
    "simulate": study_simulate,
    "converge_N": study_converge_N,
    "noise_rates": study_noise_rates,
    "wick_rates": study_wick_rates,
    "diverging_bound": study_diverging_bound,
    "inequalities": study_inequalities,
    "focusing_gate": study_focusing_gate,
}


def run_study(cfg: ExperimentConfig) -> StudyResult:
    return _RUNNERS[cfg.kind](cfg)
