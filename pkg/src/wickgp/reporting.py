"""Figure rendering for study outputs: PNG plots written next to the CSV and
JSON files a study emitted."""

from __future__ import annotations

import csv
import json
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

RATE_TABLES = {
    "noise_rates": ("levels", "lambda_N", ["y_gap_p2", "grad_gap_p2", "x_gap_p2", "exp_gap_p2"]),
    "wick_rates": ("gaps", "lambda_M", ["wick_gap_moment", "raw_gap_moment"]),
    "converge_N": ("gaps", "lambda_M", ["gap_moment"]),
    "diverging_bound": ("levels", "lambda_N", ["sup_w22_moment", "sup_wsigma_moment"]),
}


def _read_csv(path):
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    return header, data


def _column(header, data, name):
    i = header.index(name)
    return np.array([float(row[i]) for row in data])


def _plot_rates(kind, outdir, summary):
    table, xname, ynames = RATE_TABLES[kind]
    path = os.path.join(outdir, f"{kind}_{table}.csv")
    if not os.path.exists(path):
        return []
    header, data = _read_csv(path)
    if not data:
        return []
    fig, ax = plt.subplots(figsize=(6, 4.2))
    x = _column(header, data, xname)
    fits = summary.get("fits") or ({} if summary.get("fit") is None else {"gap": summary["fit"]})
    fitkeys = list(fits)
    for yname in ynames:
        if yname not in header:
            continue
        y = _column(header, data, yname)
        if (y <= 0).any():
            continue
        (line,) = ax.loglog(x, y, "o", label=yname)
        matches = [k for k in fitkeys if yname.startswith(k) or k.split("_")[0] == yname.split("_")[0]]
        if matches:
            f = fits[matches[0]]
            xs = np.linspace(math.log(x.min()), math.log(x.max()), 50)
            ax.loglog(np.exp(xs), np.exp(f["intercept"] + f["slope"] * xs), "--",
                      color=line.get_color(), alpha=0.7,
                      label=f"{matches[0]} slope {f['slope']:.3f}")
    ax.set_xlabel(xname)
    ax.set_ylabel("moment")
    ax.legend(fontsize=8)
    ax.set_title(kind.replace("_", " "))
    fig.tight_layout()
    out = os.path.join(outdir, f"{kind}_rates.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _plot_inequalities(outdir):
    path = os.path.join(outdir, "inequalities_gn_ratios.csv")
    if not os.path.exists(path):
        return []
    header, data = _read_csv(path)
    ratios = _column(header, data, "ratio")
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.hist(ratios, bins=40)
    ax.axvline(1.0, color="red", linestyle="--", label="inequality bound")
    ax.set_xlabel("quartic-norm ratio")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    out = os.path.join(outdir, "inequalities_gn_hist.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _plot_focusing(outdir):
    path = os.path.join(outdir, "focusing_gate_realizations.csv")
    if not os.path.exists(path):
        return []
    header, data = _read_csv(path)
    values = _column(header, data, "value")
    fig, ax = plt.subplots(figsize=(6, 4.2))
    ax.hist(values[np.isfinite(values)], bins=40)
    ax.axvline(4.0, color="red", linestyle="--", label="event threshold")
    ax.set_xlabel("gate value")
    ax.set_ylabel("count")
    ax.legend()
    fig.tight_layout()
    out = os.path.join(outdir, "focusing_gate_values.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def _plot_simulation(outdir):
    path = os.path.join(outdir, "simulate_observables.csv")
    if not os.path.exists(path):
        return []
    header, data = _read_csv(path)
    t = _column(header, data, "t")
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for name in ("mass", "energy"):
        vals = _column(header, data, name)
        ref = vals[0] if vals[0] != 0 else 1.0
        axes[0].plot(t, np.abs(vals - vals[0]) / abs(ref), label=f"{name} drift")
    axes[0].set_yscale("log")
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("relative drift")
    axes[0].legend()
    for name in [h for h in header if h in ("l2", "sigma") or h.startswith("w_sigma")]:
        axes[1].plot(t, _column(header, data, name), label=name)
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("norm")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    out = os.path.join(outdir, "simulate_observables.png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return [out]


def render_report(outdir):
    """Render figures for every study whose outputs live in outdir."""
    written = []
    for name in sorted(os.listdir(outdir)):
        if not name.endswith("_summary.json"):
            continue
        kind = name[: -len("_summary.json")]
        with open(os.path.join(outdir, name), encoding="utf-8") as fh:
            summary = json.load(fh)
        if kind in RATE_TABLES:
            written += _plot_rates(kind, outdir, summary)
        elif kind == "inequalities":
            written += _plot_inequalities(outdir)
        elif kind == "focusing_gate":
            written += _plot_focusing(outdir)
        elif kind == "simulate":
            written += _plot_simulation(outdir)
    return written
