"""Split-step integrator: transforms, sub-flows, conservation, resume."""

import math

import numpy as np
import pytest

from wickgp.hermite import (
    CoefField,
    GridField,
    analyze,
    apply_spectral_multiplier,
    build_grid,
    delta_coef,
    derivative_and_position,
    grid_l2_norm,
    synthesize,
)
from wickgp.dynamics import (
    IntegratorConfig,
    SimState,
    build_potential,
    default_initial_profile,
    linear_flow,
    load_checkpoint,
    potential_flow,
    run_simulation,
    save_checkpoint,
    strang_step,
    u_from_v,
    v_from_u,
)
from wickgp.noise import NoiseRealization, compute_Y, compute_YN, compute_wick, sample_noise
from wickgp.spaces import sobolev_norm


def zero_noise(K):
    return NoiseRealization(seed=0, stream_index=0, K=K, xi=np.zeros((K, K)))


@pytest.fixture(scope="module")
def grid():
    return build_grid(24, 48)


@pytest.fixture(scope="module")
def yn(grid):
    return compute_YN(compute_Y(sample_noise(17, 0, grid.K), grid), 5)


class TestRepresentationMaps:
    def test_trivial_weight_is_identity(self, grid):
        z = compute_YN(compute_Y(zero_noise(grid.K), grid), 4)
        v = default_initial_profile(grid)
        u = u_from_v(v, z)
        assert np.abs(u.coef - v.coef).max() < 1e-13

    def test_round_trip(self):
        # the 1e-8 contract needs the level well below the cutoff; the error
        # is the spill of exp(Y_N) v past the retained square
        grid = build_grid(48, 96)
        yn = compute_YN(compute_Y(sample_noise(17, 0, grid.K), grid), 3)
        v = default_initial_profile(grid)
        back = v_from_u(u_from_v(v, yn), yn)
        err = np.linalg.norm(back.coef - v.coef)
        assert err < 1e-8
        # doubled-resolution oracle: the same field and level at 2K leaves
        # the measured error far below the threshold
        big = build_grid(96, 192)
        vb = CoefField(big, np.pad(v.coef, (0, 48)).astype(np.complex128))
        ynb = compute_YN(compute_Y(sample_noise(17, 0, big.K), big), 3)
        errb = np.linalg.norm(v_from_u(u_from_v(vb, ynb), ynb).coef - vb.coef)
        assert errb < 0.1 * err

    def test_mass_identity(self, grid, yn):
        from wickgp.observables import transformed_mass

        v = default_initial_profile(grid)
        u = u_from_v(v, yn)
        assert u.l2_norm() ** 2 == pytest.approx(transformed_mass(v, yn), abs=1e-8)

    def test_constructed_inverse(self):
        grid = build_grid(48, 96)
        yn = compute_YN(compute_Y(sample_noise(17, 0, grid.K), grid), 3)
        u = u_from_v(delta_coef(grid, 0, 0), yn)
        v = v_from_u(u, yn)
        ref = np.zeros((grid.K, grid.K))
        ref[0, 0] = 1.0
        assert np.abs(v.coef - ref).max() < 1e-8


class TestLinearFlow:
    def test_zero_time_identity(self, grid):
        v = default_initial_profile(grid)
        assert np.array_equal(linear_flow(v, 0.0).coef, v.coef)

    def test_ground_mode_full_turn(self, grid):
        out = linear_flow(delta_coef(grid, 0, 0), math.pi)
        assert out.coef[0, 0] == pytest.approx(1.0, abs=1e-12)

    def test_norms_invariant(self, grid):
        rng = np.random.default_rng(2)
        c = CoefField(grid, rng.standard_normal((grid.K, grid.K)) + 1j * rng.standard_normal((grid.K, grid.K)))
        out = linear_flow(c, 0.37)
        for s in (0.0, 1.0, 2.0):
            assert sobolev_norm(out, s) == pytest.approx(sobolev_norm(c, s), rel=1e-12)


class TestPotentialFlow:
    def test_no_potential_identity(self, grid):
        v = default_initial_profile(grid)
        out = potential_flow(v, GridField(grid, np.zeros((grid.Mq, grid.Mq))), 0.0, 0.1)
        assert np.abs(out.coef - v.coef).max() < 1e-12

    def test_constant_potential_global_phase(self, grid):
        v = default_initial_profile(grid)
        cval = 0.7
        out = potential_flow(v, GridField(grid, np.full((grid.Mq, grid.Mq), cval)), 0.0, 0.25)
        assert np.abs(out.coef - np.exp(1j * 0.25 * cval) * v.coef).max() < 1e-12
        for s in (0.0, 1.0):
            assert sobolev_norm(out, s) == pytest.approx(sobolev_norm(v, s), rel=1e-12)

    def test_grid_norm_invariant_before_projection(self, grid):
        rng = np.random.default_rng(4)
        u = CoefField(grid, rng.standard_normal((grid.K, grid.K)) + 1j * rng.standard_normal((grid.K, grid.K)))
        V = rng.standard_normal((grid.Mq, grid.Mq))
        tau, lam = 0.013, -1.0
        vals = synthesize(u).values
        rotated = np.exp(1j * tau * (V + lam * np.abs(vals) ** 2)) * vals
        before = grid_l2_norm(GridField(grid, vals))
        after = grid_l2_norm(GridField(grid, rotated))
        assert after == pytest.approx(before, rel=1e-12)


class TestStrangStep:
    def test_reduces_to_linear_flow_without_potential(self):
        grid = build_grid(12, 24)
        noise = zero_noise(grid.K)
        v0 = default_initial_profile(grid)
        state = SimState(t=0.0, u=v0, N=0, potential=build_potential(noise, 0, grid), lam=0.0)
        exact = v0
        dt = 1e-3
        for _ in range(1000):
            state = strang_step(state, dt)
        exact = linear_flow(v0, 1000 * dt)
        assert np.linalg.norm(state.u.coef - exact.coef) < 1e-10

    def test_self_convergence_second_order(self):
        grid = build_grid(16, 32)
        noise = sample_noise(5, 1, grid.K)
        v0 = default_initial_profile(grid)
        finals = []
        for dt in (4e-3, 2e-3, 1e-3):
            cfg = IntegratorConfig(dt=dt, t_final=0.5, record_every=10**6)
            res = run_simulation(noise, 4, v0, cfg, lam=-1.0, record=False)
            finals.append(res.state.u.coef)
        e1 = np.linalg.norm(finals[0] - finals[1])
        e2 = np.linalg.norm(finals[1] - finals[2])
        order = math.log2(e1 / e2)
        assert 1.8 <= order <= 2.2

    def test_time_reversal(self):
        grid = build_grid(16, 32)
        noise = sample_noise(11, 0, grid.K)
        v0 = default_initial_profile(grid)
        cfg = IntegratorConfig(dt=1e-3, t_final=1.0, record_every=10**6)
        fwd = run_simulation(noise, 4, v0, cfg, lam=-1.0, record=False)
        back_cfg = IntegratorConfig(dt=1e-3, t_final=0.0, record_every=10**6)
        back = run_simulation(noise, 4, v0, back_cfg, lam=-1.0, resume_from=fwd.state, record=False)
        u0 = u_from_v(v0, fwd.YN)
        assert np.linalg.norm(back.state.u.coef - u0.coef) < 1e-6


class TestRunSimulation:
    def test_linear_closed_form(self):
        grid = build_grid(8, 16)
        noise = sample_noise(3, 0, grid.K)   # any seed: level 0 kills the potential
        v0 = delta_coef(grid, 0, 0)
        cfg = IntegratorConfig(dt=1e-3, t_final=1.0, record_every=100)
        res = run_simulation(noise, 0, v0, cfg, lam=0.0)
        assert res.status == "completed"
        for t, l2 in zip(res.series.times, res.series.l2):
            assert l2 == pytest.approx(1.0, abs=1e-9)
        final = res.state.u.coef[0, 0]
        assert abs(final - np.exp(-2j * 1.0)) < 1e-9

    def test_defocusing_mass_drift_without_noise(self):
        grid = build_grid(16, 32)
        noise = zero_noise(grid.K)
        v0 = default_initial_profile(grid)
        cfg = IntegratorConfig(dt=1e-3, t_final=1.0, record_every=100)
        res = run_simulation(noise, 4, v0, cfg, lam=-1.0)
        m = np.array(res.series.mass)
        assert np.abs(m - m[0]).max() / m[0] < 1e-8
        assert max(res.series.sigma) < 10 * res.series.sigma[0]

    def test_transformed_mass_constant_with_noise(self):
        grid = build_grid(32, 64)
        noise = sample_noise(23, 2, grid.K)
        v0 = default_initial_profile(grid)
        cfg = IntegratorConfig(dt=1e-3, t_final=0.5, record_every=50)
        res = run_simulation(noise, 6, v0, cfg, lam=0.0)
        m = np.array(res.series.mass)
        assert np.abs(m - m[0]).max() / m[0] < 1e-7

    def test_deterministic_series(self):
        grid = build_grid(12, 24)
        v0 = default_initial_profile(grid)
        cfg = IntegratorConfig(dt=2e-3, t_final=0.2, record_every=10)
        a = run_simulation(sample_noise(9, 0, grid.K), 3, v0, cfg, lam=-1.0)
        b = run_simulation(sample_noise(9, 0, grid.K), 3, v0, cfg, lam=-1.0)
        assert a.series.times == b.series.times
        assert a.series.mass == b.series.mass
        assert a.series.energy == b.series.energy
        assert np.array_equal(a.state.u.coef, b.state.u.coef)

    def test_pathological_weight_reports_blowup(self):
        grid = build_grid(8, 16)
        xi = np.zeros((grid.K, grid.K))
        xi[0, 0] = 1e7
        noise = NoiseRealization(seed=0, stream_index=0, K=grid.K, xi=xi)
        cfg = IntegratorConfig(dt=1e-2, t_final=0.1)
        res = run_simulation(noise, 4, delta_coef(grid, 0, 0), cfg, lam=1.0)
        assert res.status == "suspected_blowup"
        assert res.blowup_time == 0.0

    def test_checkpoint_resume_bit_exact(self, tmp_path):
        grid = build_grid(12, 24)
        noise = sample_noise(31, 5, grid.K)
        v0 = default_initial_profile(grid)
        full_cfg = IntegratorConfig(dt=1e-3, t_final=0.4, record_every=100)
        full = run_simulation(noise, 3, v0, full_cfg, lam=-1.0, record=False)

        half_cfg = IntegratorConfig(dt=1e-3, t_final=0.2, record_every=100)
        half = run_simulation(noise, 3, v0, half_cfg, lam=-1.0, record=False)
        p = tmp_path / "chk.json"
        save_checkpoint(half.state, noise, full_cfg, p)
        state, noise2, cfg2 = load_checkpoint(p, grid=grid)
        assert np.array_equal(state.u.coef, half.state.u.coef)
        resumed = run_simulation(noise2, 3, v0, cfg2, lam=state.lam, resume_from=state, record=False)
        assert np.array_equal(resumed.state.u.coef, full.state.u.coef)


class TestVSpaceOracle:
    """Brute-force RK4 on the v-equation must agree with the u-form step."""

    @staticmethod
    def make_rhs(grid, noise, N, lam):
        from wickgp.noise import exp_weight

        YN = compute_YN(compute_Y(noise, grid), N)
        wick = compute_wick(noise, N, grid).wick.values
        g1 = synthesize(derivative_and_position(YN, "d1")).values.real
        g2 = synthesize(derivative_and_position(YN, "d2")).values.real
        ynv = synthesize(YN).values.real
        x1y = grid.nodes[:, None] * ynv
        x2y = grid.nodes[None, :] * ynv
        e2 = exp_weight(YN, 2.0).field.values

        def rhs(v: CoefField) -> CoefField:
            d1 = synthesize(derivative_and_position(v, "d1")).values
            d2 = synthesize(derivative_and_position(v, "d2")).values
            vv = synthesize(v).values
            x1v = grid.nodes[:, None] * vv
            x2v = grid.nodes[None, :] * vv
            gridpart = (2.0 * (g1 * d1 + g2 * d2) + x1y * x1v + x2y * x2v
                        + wick * vv + lam * np.abs(vv) ** 2 * vv * e2)
            lin = apply_spectral_multiplier(v, -grid.lam2)
            total = lin.coef + analyze(GridField(grid, gridpart)).coef
            return CoefField(grid, 1j * total)

        return rhs, YN

    @staticmethod
    def rk4(v, rhs, dt, steps):
        for _ in range(steps):
            k1 = rhs(v).coef
            k2 = rhs(CoefField(v.grid, v.coef + 0.5 * dt * k1)).coef
            k3 = rhs(CoefField(v.grid, v.coef + 0.5 * dt * k2)).coef
            k4 = rhs(CoefField(v.grid, v.coef + dt * k3)).coef
            v = CoefField(v.grid, v.coef + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        return v

    def test_equivalence_without_noise(self):
        # with xi = 0 both representations integrate the same cubic flow
        grid = build_grid(8, 16)
        noise = zero_noise(grid.K)
        lam = -1.0
        v0 = default_initial_profile(grid)
        rhs, YN = self.make_rhs(grid, noise, 2, lam)
        dt, steps = 1e-4, 200
        vN = self.rk4(v0, rhs, dt, steps)
        cfg = IntegratorConfig(dt=dt, t_final=dt * steps, record_every=10**6)
        res = run_simulation(noise, 2, v0, cfg, lam=lam, record=False)
        v_split = v_from_u(res.state.u, res.YN)
        assert np.linalg.norm(v_split.coef - vN.coef) < 1e-8

    def test_equivalence_with_noise(self):
        # level far below the cutoff keeps the change of representation
        # inside the resolved square, so both closures agree to 1e-8
        grid = build_grid(48, 96)
        noise = sample_noise(13, 0, grid.K)
        lam = -1.0
        v0 = default_initial_profile(grid)
        rhs, YN = self.make_rhs(grid, noise, 3, lam)
        # RK4 local error scales like (dt lam_max^2)^5; keep it below 1e-10
        dt, steps = 2e-5, 500
        vN = self.rk4(v0, rhs, dt, steps)
        cfg = IntegratorConfig(dt=1e-5, t_final=dt * steps, record_every=10**6)
        res = run_simulation(noise, 3, v0, cfg, lam=lam, record=False)
        v_split = v_from_u(res.state.u, res.YN)
        assert np.linalg.norm(v_split.coef - vN.coef) < 1e-8

        # matching diagnostics, not only fields
        from wickgp.observables import transformed_mass

        m1 = transformed_mass(vN, YN)
        m2 = transformed_mass(v_split, res.YN)
        assert m1 == pytest.approx(m2, rel=1e-8)
