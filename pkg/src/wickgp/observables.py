"""Transformed mass and energy, Sigma / W^{sigma,2} norms, inequality
checkers and the focusing smallness event."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hermite import (
    CoefField,
    GridField,
    derivative_and_position,
    gradient_l2_sq,
    quad_integral,
    synthesize,
)
from .noise import ExpOverflowError, WickField, exp_weight
from .spaces import sobolev_norm


def sigma_norm(v: CoefField):
    """|v|_Sigma, the W^{1,2} norm, exact on coefficients."""
    return sobolev_norm(v, 1.0)


def transformed_mass(v: CoefField, YN: CoefField, e2=None):
    """integral |v|^2 exp(2 Y_N) dx by quadrature; e2 may carry a precomputed
    weight field to avoid re-synthesizing Y_N in hot loops."""
    if v.grid is not YN.grid:
        raise ValueError("fields must share one grid")
    w2 = e2.values if e2 is not None else exp_weight(YN, 2.0).field.values
    dens = np.abs(synthesize(v).values) ** 2 * w2
    return float(quad_integral(GridField(v.grid, dens)).real)


@dataclass(frozen=True)
class EnergyBreakdown:
    total: float
    kinetic_grad: float   # 1/2 int |grad v|^2 e^{2Y_N}
    kinetic_pos: float    # 1/2 int |x v|^2 e^{2Y_N}
    pot_y: float          # -1/2 int |x v|^2 Y_N e^{2Y_N}
    wick: float           # -1/2 int :|grad Y_N|^2: |v|^2 e^{2Y_N}
    quartic: float        # -lambda/4 int |v|^4 e^{4Y_N}

    @property
    def kinetic(self):
        return self.kinetic_grad + self.kinetic_pos


def transformed_energy(v: CoefField, YN: CoefField, wick: WickField, lam,
                       e2=None, e4=None, yn_values=None) -> EnergyBreakdown:
    """Transformed energy of the level-N flow.

    1/2 int (|grad v|^2 + |xv|^2 - |xv|^2 Y_N - :|grad Y_N|^2: |v|^2) e^{2Y_N}
    - lambda/4 int |v|^4 e^{4Y_N},
    with every derivative taken spectrally and every integral by quadrature.
    The Wick pairing is a plain integral here: at finite level all factors
    are classical functions.
    """
    grid = v.grid
    w2 = e2.values if e2 is not None else exp_weight(YN, 2.0).field.values
    w4 = e4.values if e4 is not None else exp_weight(YN, 4.0).field.values
    yn = yn_values if yn_values is not None else synthesize(YN).values.real

    d1 = synthesize(derivative_and_position(v, "d1")).values
    d2 = synthesize(derivative_and_position(v, "d2")).values
    x1 = synthesize(derivative_and_position(v, "x1")).values
    x2 = synthesize(derivative_and_position(v, "x2")).values
    vv = synthesize(v).values
    absv2 = np.abs(vv) ** 2
    gradsq = np.abs(d1) ** 2 + np.abs(d2) ** 2
    possq = np.abs(x1) ** 2 + np.abs(x2) ** 2

    def integral(dens):
        return float(quad_integral(GridField(grid, dens)).real)

    kinetic_grad = 0.5 * integral(gradsq * w2)
    kinetic_pos = 0.5 * integral(possq * w2)
    pot_y = -0.5 * integral(possq * yn * w2)
    wick_term = -0.5 * integral(wick.wick.values * absv2 * w2)
    quartic = -0.25 * lam * integral(absv2**2 * w4)
    total = kinetic_grad + kinetic_pos + pot_y + wick_term + quartic
    return EnergyBreakdown(total, kinetic_grad, kinetic_pos, pot_y, wick_term, quartic)


@dataclass(frozen=True)
class InequalityReport:
    ratio: float
    lhs: float
    rhs: float
    vacuous: bool

    @property
    def passed(self):
        return self.vacuous or self.ratio <= 1.0 + 1e-8


def check_gagliardo_nirenberg(v: CoefField) -> InequalityReport:
    """|u|_{L4}^4 <= 1/2 |u|_{L2}^2 |grad u|_{L2}^2, quadrature versus the
    exact spectral gradient norm."""
    l2sq = v.l2_norm() ** 2
    if l2sq == 0.0:
        return InequalityReport(0.0, 0.0, 0.0, vacuous=True)
    vv = synthesize(v).values
    lhs = float(quad_integral(GridField(v.grid, np.abs(vv) ** 4)).real)
    rhs = 0.5 * l2sq * gradient_l2_sq(v)
    return InequalityReport(lhs / rhs, lhs, rhs, vacuous=False)


@dataclass(frozen=True)
class BrezisGallouetReport:
    constant: float       # empirical L^inf / (1 + Sigma sqrt(1 + ln(1 + W^{sigma,2})))
    linf: float
    sigma_part: float
    vacuous: bool


def check_brezis_gallouet(v: CoefField, sigma) -> BrezisGallouetReport:
    """Empirical constant of |v|_{L^inf} <= C (1 + |v|_Sigma sqrt(1 + ln(1 + |v|_{W^{sigma,2}}))).

    No fixed C is asserted: suites track the corpus maximum and its stability
    under basis refinement.
    """
    if sigma <= 1.0:
        raise ValueError("the inequality needs sigma > 1")
    linf = float(np.abs(synthesize(v).values).max())
    if linf == 0.0:
        return BrezisGallouetReport(0.0, 0.0, 1.0, vacuous=True)
    s = sigma_norm(v)
    ws = sobolev_norm(v, sigma)
    denom = 1.0 + s * math.sqrt(1.0 + math.log1p(ws))
    return BrezisGallouetReport(linf / denom, linf, denom, vacuous=False)


@dataclass(frozen=True)
class FocusingGate:
    passed: bool
    value: float          # lambda L^2 |e^{-2Y}|^2 |e^{2Y}| |e^{4Y}| (grid L^inf)
    margin: float         # 4 - value, negative on failure
    overflow: bool = False


def focusing_event_predicate(Y_proxy: CoefField, lam, L) -> FocusingGate:
    """Evaluate the smallness event lambda L^2 |e^{-2Y}|_inf^2 |e^{2Y}|_inf |e^{4Y}|_inf < 4.

    Y_proxy is the finest-level potential available; an exponential overflow
    marks the realization as failing with a diagnostic value.
    """
    if lam <= 0 or L <= 0:
        raise ValueError("the focusing event needs lambda > 0 and L > 0")
    try:
        m2 = exp_weight(Y_proxy, -2.0).max
        p2 = exp_weight(Y_proxy, 2.0).max
        p4 = exp_weight(Y_proxy, 4.0).max
    except ExpOverflowError:
        return FocusingGate(passed=False, value=math.inf, margin=-math.inf, overflow=True)
    value = lam * L * L * m2 * m2 * p2 * p4
    return FocusingGate(passed=value < 4.0, value=float(value), margin=float(4.0 - value))


OBSERVABLE_COLUMNS = ("t", "mass", "energy", "energy_kinetic", "energy_potY", "energy_wick", "energy_quartic", "l2", "sigma")


@dataclass
class ObservableSeries:
    """Per-simulation time series of the conserved and monitored quantities."""

    sigmas: tuple
    times: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    energy: list = field(default_factory=list)
    energy_kinetic: list = field(default_factory=list)
    energy_potY: list = field(default_factory=list)
    energy_wick: list = field(default_factory=list)
    energy_quartic: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    sigma: list = field(default_factory=list)
    w_sigma: dict = field(default_factory=dict)

    def __post_init__(self):
        for s in self.sigmas:
            self.w_sigma.setdefault(s, [])

    def append(self, t, mass, eb: EnergyBreakdown, v: CoefField):
        self.times.append(float(t))
        self.mass.append(float(mass))
        self.energy.append(eb.total)
        self.energy_kinetic.append(eb.kinetic)
        self.energy_potY.append(eb.pot_y)
        self.energy_wick.append(eb.wick)
        self.energy_quartic.append(eb.quartic)
        self.l2.append(v.l2_norm())
        self.sigma.append(sigma_norm(v))
        for s in self.sigmas:
            self.w_sigma[s].append(sobolev_norm(v, s))

    def __len__(self):
        return len(self.times)

    @property
    def header(self):
        return list(OBSERVABLE_COLUMNS) + [f"w_sigma_{s:g}" for s in self.sigmas]

    def rows(self):
        for i in range(len(self.times)):
            row = [self.times[i], self.mass[i], self.energy[i], self.energy_kinetic[i],
                   self.energy_potY[i], self.energy_wick[i], self.energy_quartic[i],
                   self.l2[i], self.sigma[i]]
            row += [self.w_sigma[s][i] for s in self.sigmas]
            yield row

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.header) + "\n")
            for row in self.rows():
                fh.write(",".join(repr(float(x)) for x in row) + "\n")
