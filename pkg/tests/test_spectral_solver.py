import json
import math

import numpy as np
import pytest

from nstransition.errors import BlowUpError, ConfigError, DomainError, FieldValidationError
from nstransition.field_core import FlowParams, Grid, Snapshot, VelocityField, divergence, taylor_green
from nstransition.leray_diagnostics import kinetic_energy, leray_membership
from nstransition.spectral_solver import (
    InitialCondition,
    SolverConfig,
    Timeline,
    analytic_taylor_green,
    pressure_from_velocity,
    random_shear,
    simulate,
    step,
    taylor_green_pressure,
    velocity_from_state,
    vorticity_state,
)


def tg_config(nu=0.01, n=64, t_end=1.0, interval=0.1, **kw):
    return SolverConfig(Grid(n, n), FlowParams(nu), t_end=t_end, snapshot_interval=interval, **kw)


class TestStep:
    def test_zero_is_fixed_point(self, grid64, params):
        s = vorticity_state(VelocityField.zeros(grid64))
        out = step(s, 0.1, params)
        assert not np.any(out.omega_hat)

    def test_zero_dt_is_identity(self, grid64, params):
        s = vorticity_state(taylor_green(grid64))
        assert step(s, 0.0, params) is s

    def test_negative_dt(self, grid64, params):
        with pytest.raises(DomainError):
            step(vorticity_state(taylor_green(grid64)), -1e-3, params)

    def test_taylor_green_mode_decay(self, grid64, params):
        # Laplacian eigenvalue of the TG mode is -2, so omega decays as exp(-2 nu t)
        s = vorticity_state(taylor_green(grid64))
        out = step(s, 1e-3, params)
        expected = s.omega_hat * math.exp(-2 * 0.01 * 1e-3)
        err = np.abs(out.omega_hat - expected).max() / np.abs(s.omega_hat).max()
        assert err < 1e-10

    def test_state_roundtrip_keeps_mean_flow(self, grid64):
        f = taylor_green(grid64)
        g = VelocityField(grid64, f.u + 0.7, f.v - 0.2)
        back = velocity_from_state(vorticity_state(g))
        np.testing.assert_allclose(back.u, g.u, atol=1e-13)
        np.testing.assert_allclose(back.v, g.v, atol=1e-13)

    def test_blow_up_reports_time(self):
        g = Grid(16, 16)
        cfg = SolverConfig(g, FlowParams(1.0), t_end=1000.0, snapshot_interval=100.0, dt=10.0,
                           initial_condition=InitialCondition("random_shear", 1.0, 3))
        with pytest.raises(BlowUpError) as info:
            simulate(cfg)
        assert 0 < info.value.time <= 1000.0
        partial = info.value.timeline
        assert isinstance(partial, Timeline) and len(partial) >= 1
        assert partial.times[-1] < info.value.time


class TestSimulate:
    def test_analytic_energy_decay(self):
        tl = simulate(tg_config())
        assert kinetic_energy(tl[-1].velocity) == pytest.approx(math.pi**2 * math.exp(-0.04), rel=1e-6)

    def test_zero_initial_field(self):
        tl = simulate(tg_config(n=16, initial_condition=InitialCondition("taylor_green", 0.0)))
        for s in tl.snapshots:
            assert not s.velocity.u.any() and not s.velocity.v.any() and not s.pressure.data.any()

    def test_sampling_contract(self):
        tl = simulate(tg_config(n=32))
        assert len(tl) == 11
        np.testing.assert_allclose(tl.times, np.arange(11) * 0.1, atol=1e-12)
        assert tl.times[-1] == 1.0

    def test_t_end_off_grid_is_appended(self):
        tl = simulate(tg_config(n=16, t_end=0.25, interval=0.1))
        np.testing.assert_allclose(tl.times, [0.0, 0.1, 0.2, 0.25], atol=1e-12)

    def test_matches_analytic_solution(self):
        tl = simulate(tg_config(n=32))
        for s in tl.snapshots:
            exact = analytic_taylor_green(s.grid, 1.0, 0.01, s.time)
            np.testing.assert_allclose(s.velocity.u, exact.velocity.u, atol=1e-10)
            np.testing.assert_allclose(s.pressure.data, exact.pressure.data, atol=1e-10)

    def test_auto_dt_stable_at_high_viscosity(self):
        # viscous step limit must respect the RK4 stability interval at the grid cutoff
        cfg = SolverConfig(Grid(32, 32), FlowParams(0.08), t_end=8.0, snapshot_interval=1.0)
        s = simulate(cfg)[-1]
        exact = analytic_taylor_green(s.grid, 1.0, 0.08, 8.0)
        np.testing.assert_allclose(s.velocity.u, exact.velocity.u, atol=1e-10)

    def test_temporal_order(self):
        # 16^2 keeps nu*|k|^2*dt inside the RK4 stability region for large dt
        errs = []
        for dt in (0.05, 0.025):
            cfg = SolverConfig(Grid(16, 16), FlowParams(0.2), t_end=1.0, snapshot_interval=1.0, dt=dt)
            s = simulate(cfg)[-1]
            exact = analytic_taylor_green(s.grid, 1.0, 0.2, 1.0)
            errs.append(np.abs(s.velocity.u - exact.velocity.u).max())
        order = math.log2(errs[0] / errs[1])
        assert order >= 3.0

    def test_random_shear_invariants(self):
        cfg = SolverConfig(Grid(32, 32), FlowParams(0.02), t_end=2.0, snapshot_interval=0.1,
                           initial_condition=InitialCondition("random_shear", 1.0, 11))
        tl = simulate(cfg)
        ke = [kinetic_energy(s.velocity) for s in tl.snapshots]
        for s in tl.snapshots:
            assert np.abs(divergence(s.velocity).data).max() < 1e-10
        assert all(b <= a + 1e-12 for a, b in zip(ke, ke[1:]))
        sup_l2, integral = leray_membership(tl)
        assert math.isfinite(sup_l2) and math.isfinite(integral) and integral > 0

    def test_deterministic(self):
        cfg = SolverConfig(Grid(32, 32), FlowParams(0.01), t_end=0.5, snapshot_interval=0.25,
                           initial_condition=InitialCondition("random_shear", 1.0, 5))
        a, b = simulate(cfg), simulate(cfg)
        assert all(x == y for x, y in zip(a.snapshots, b.snapshots))

    def test_dealias_toggle_changes_nonlinear_flow(self):
        base = dict(t_end=0.5, snapshot_interval=0.5,
                    initial_condition=InitialCondition("random_shear", 2.0, 1))
        on = simulate(SolverConfig(Grid(16, 16), FlowParams(0.01), dealias=True, **base))[-1]
        off = simulate(SolverConfig(Grid(16, 16), FlowParams(0.01), dealias=False, **base))[-1]
        assert not np.array_equal(on.velocity.u, off.velocity.u)

    def test_stop_when(self):
        seen = []
        tl = simulate(tg_config(n=16), stop_when=lambda s: seen.append(s.time) or s.time >= 0.3)
        assert tl.times[-1] == pytest.approx(0.3)

    def test_file_initial_condition(self, tmp_path):
        from nstransition.field_core import snapshot_write
        g = Grid(16, 16)
        snapshot_write(analytic_taylor_green(g, 1.0, 0.01, 0.0), tmp_path / "ic.bin")
        cfg = SolverConfig(g, FlowParams(0.01), t_end=0.1, snapshot_interval=0.1,
                           initial_condition=InitialCondition("file", path=str(tmp_path / "ic.bin")))
        tl = simulate(cfg)
        np.testing.assert_allclose(tl[0].velocity.u, taylor_green(g).u, atol=1e-14)


class TestPressure:
    def test_taylor_green(self, grid64):
        # u.grad(u) = (sin 2x, sin 2y)/2 for unit TG, so grad p = -(sin 2x, sin 2y)/2
        X, Y = grid64.coordinates()
        expected = 0.25 * (np.cos(2 * X) + np.cos(2 * Y))
        p = pressure_from_velocity(taylor_green(grid64))
        assert np.abs(p.data - expected).max() / np.abs(expected).max() < 1e-10

    def test_non_square_box(self):
        g = Grid(32, 16, lx=4.0, ly=3.0)
        p = pressure_from_velocity(taylor_green(g, 1.5))
        ref = taylor_green_pressure(g, 1.5).data
        assert np.abs(p.data - ref).max() / np.abs(ref).max() < 1e-10

    def test_uniform_and_zero(self, grid64):
        assert np.abs(pressure_from_velocity(VelocityField.uniform(grid64, 2.0)).data).max() < 1e-14
        assert not pressure_from_velocity(VelocityField.zeros(grid64)).data.any()

    def test_zero_mean(self, grid64):
        f = random_shear(grid64, 4, 1.0)
        assert abs(pressure_from_velocity(f).data.mean()) < 1e-14


class TestAnalyticTaylorGreen:
    def test_initial(self, grid64):
        s = analytic_taylor_green(grid64, 1.0, 0.01, 0.0)
        assert s.velocity == taylor_green(grid64)
        assert s.pressure == taylor_green_pressure(grid64)

    def test_half_decay(self, grid64):
        s = analytic_taylor_green(grid64, 1.0, 0.01, 34.657)
        assert np.abs(s.velocity.u).max() == pytest.approx(0.5, rel=1e-4)
        assert np.abs(s.pressure.data).max() == pytest.approx(0.5 * 0.25, rel=2e-4)

    def test_zero_amplitude(self, grid64):
        s = analytic_taylor_green(grid64, 0.0, 0.01, 3.0)
        assert not s.velocity.u.any() and not s.pressure.data.any()

    def test_negative_time(self, grid64):
        with pytest.raises(DomainError):
            analytic_taylor_green(grid64, 1.0, 0.01, -1.0)


class TestRandomShear:
    def test_normalised_and_solenoidal(self, grid64):
        f = random_shear(grid64, 42, 2.5)
        assert np.hypot(f.u, f.v).max() == pytest.approx(2.5, rel=1e-12)
        assert np.abs(divergence(f).data).max() < 1e-10

    def test_seeded(self, grid64):
        assert random_shear(grid64, 1, 1.0) == random_shear(grid64, 1, 1.0)
        assert random_shear(grid64, 1, 1.0) != random_shear(grid64, 2, 1.0)

    def test_band_limited(self, grid64):
        f = random_shear(grid64, 9, 1.0)
        spec = np.abs(np.fft.fft2(f.u))
        m = np.fft.fftfreq(64, 1 / 64)
        mag = np.hypot(m[None, :], m[:, None])
        assert spec[mag > 4].max() < 1e-10 * spec.max()


class TestTimeline:
    def test_rejects_non_increasing(self, grid64, params):
        s0 = Snapshot(0.0, taylor_green(grid64))
        with pytest.raises(FieldValidationError):
            Timeline([s0, Snapshot(0.0, taylor_green(grid64))], params)


class TestConfig:
    def doc(self):
        return {"grid": {"nx": 32, "ny": 32}, "params": {"nu": 0.01}, "t_end": 1.0,
                "snapshot_interval": 0.1,
                "initial_condition": {"kind": "taylor_green", "amplitude": 1.0}}

    def test_json_roundtrip(self):
        cfg = SolverConfig.from_dict(self.doc())
        assert SolverConfig.from_json(cfg.to_json()) == cfg
        assert set(json.loads(cfg.to_json())) == {"grid", "params", "dt", "t_end", "cfl", "dealias",
                                                  "snapshot_interval", "initial_condition"}

    @pytest.mark.parametrize("mutate,field", [
        (lambda d: d.update(extra=1), "extra"),
        (lambda d: d["params"].update(nu=-1), "nu"),
        (lambda d: d["params"].update(viscosity=1), "viscosity"),
        (lambda d: d.update(cfl=1.5), "cfl"),
        (lambda d: d.update(t_end=0), "t_end"),
        (lambda d: d.update(dt="fast"), "dt"),
        (lambda d: d["grid"].update(nx=9), "grid"),
        (lambda d: d["initial_condition"].update(kind="vortex"), "kind"),
        (lambda d: d["initial_condition"].update(seed=1), "seed"),
    ])
    def test_rejections_name_the_field(self, mutate, field):
        doc = self.doc()
        mutate(doc)
        with pytest.raises(ConfigError) as info:
            SolverConfig.from_dict(doc)
        assert field in str(info.value)

    def test_bad_json_reports_line(self):
        with pytest.raises(ConfigError, match="line 2"):
            SolverConfig.from_json('{\n  "grid": ,\n}')
