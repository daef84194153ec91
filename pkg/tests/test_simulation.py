"""Coupled stepping, initial data, the run loop and its ledger."""

import os

import numpy as np
import pytest

from conftest import demo_config, demo_initial_condition, demo_params
from maggsim.cahn_hilliard import ch_step
from maggsim.errors import CflViolation, ConfigError
from maggsim.hydrodynamics import microrotation_step, momentum_step
from maggsim.model import ModelParams, State, make_state
from maggsim.simulation import (
    CoupledStepOptions,
    InitialCondition,
    ModeSpec,
    OutputConfig,
    SimConfig,
    build_initial_state,
    cfl_dt,
    config_with,
    coupled_step,
    run,
)
from maggsim.spectral import Field, VecField, divergence, make_grid

PI = np.pi


def reflect(a):
    """Point values of x -> -x on the periodic grid."""
    return np.roll(a[::-1, ::-1], 1, axis=(0, 1))


class TestValidation:
    def test_grid_size(self):
        with pytest.raises(ConfigError, match="even and >= 8"):
            demo_config(n=15).validate()

    def test_dt(self):
        with pytest.raises(ConfigError, match="dt must be positive"):
            demo_config(dt=0.0).validate()

    def test_t_end(self):
        with pytest.raises(ConfigError, match="t_end"):
            demo_config(t_end=-1.0).validate()

    @pytest.mark.parametrize("c", [0.0, 1.5])
    def test_cfl_number(self, c):
        with pytest.raises(ConfigError, match="cfl_number"):
            demo_config(cfl_number=c).validate()

    def test_box_length(self):
        with pytest.raises(ConfigError, match="box_length"):
            demo_config(box_length=0.0).validate()

    def test_initial_condition_kind(self):
        with pytest.raises(ConfigError, match="unknown initial condition kind"):
            InitialCondition(kind="vortex_sheet").validate()

    def test_stripe_width(self):
        with pytest.raises(ConfigError, match="stripe width"):
            InitialCondition(kind="tanh_stripe", width=0.0).validate()

    def test_snapshot_path(self):
        with pytest.raises(ConfigError, match="needs a path"):
            InitialCondition(kind="from_snapshot").validate()

    def test_noise_amplitude(self):
        with pytest.raises(ConfigError, match="noise amplitude"):
            InitialCondition(noise_amplitude=-0.1).validate()

    def test_output_knobs(self):
        with pytest.raises(ConfigError, match="ledger_every"):
            OutputConfig(ledger_every=0).validate()
        with pytest.raises(ConfigError, match="snapshot_every"):
            OutputConfig(snapshot_every=-1).validate()

    def test_config_with(self):
        base = demo_config()
        changed = config_with(base, dt=5e-4)
        assert changed.dt == 5e-4
        assert changed.n == base.n
        with pytest.raises(ConfigError):
            config_with(base, dt=-1.0)


class TestCflDt:
    def test_cap_wins_for_slow_flow(self):
        grid = make_grid(16, 2 * PI)
        u = VecField(
            Field.from_values(grid, np.full((16, 16), 0.5)), Field.zeros(grid)
        )
        state = make_state(u, Field.zeros(grid), Field.zeros(grid), ModelParams())
        assert cfl_dt(state, 0.4, grid, 1e-3) == 1e-3

    def test_advective_bound(self):
        grid = make_grid(16, 2 * PI)
        u = VecField(
            Field.from_values(grid, np.full((16, 16), 0.5)), Field.zeros(grid)
        )
        state = make_state(u, Field.zeros(grid), Field.zeros(grid), ModelParams())
        assert cfl_dt(state, 0.4, grid, 10.0) == 0.4 * grid.spacing / 0.5

    def test_scales_inversely_with_speed(self):
        grid = make_grid(16, 2 * PI)
        u = VecField(
            Field.from_values(grid, np.full((16, 16), 5.0)), Field.zeros(grid)
        )
        state = make_state(u, Field.zeros(grid), Field.zeros(grid), ModelParams())
        assert cfl_dt(state, 0.4, grid, 10.0) == 0.4 * grid.spacing / 5.0


class TestInitialData:
    def test_uniform_plus_modes_formula(self):
        config = demo_config(n=32)
        grid = make_grid(32, 2 * PI)
        state = build_initial_state(config, grid)
        ic = config.initial_condition
        expected = np.zeros((32, 32)) + ic.phi_mean
        for m in ic.phi_modes:
            expected += m.amplitude * np.cos(m.kx * grid.x + m.ky * grid.y + m.phase)
        np.testing.assert_allclose(state.phi.values, expected, atol=1e-15)
        assert state.time == 0.0

    def test_velocity_is_solenoidal(self):
        state = build_initial_state(demo_config(n=32))
        scale = max(state.u.x.max_abs(), state.u.y.max_abs())
        assert scale > 0
        assert divergence(state.u).max_abs() <= 1e-13 * scale

    def test_noise_is_seeded_and_peak_normalized(self):
        ic = InitialCondition(noise_amplitude=0.05)
        a = build_initial_state(demo_config(n=32, initial_condition=ic, seed=3))
        b = build_initial_state(demo_config(n=32, initial_condition=ic, seed=3))
        c = build_initial_state(demo_config(n=32, initial_condition=ic, seed=4))
        np.testing.assert_array_equal(a.phi.values, b.phi.values)
        assert np.max(np.abs(a.phi.values - c.phi.values)) > 1e-3
        assert np.max(np.abs(a.phi.values)) == 0.05
        assert abs(a.phi.mean()) <= 1e-14

    def test_tanh_stripe(self):
        ic = InitialCondition(kind="tanh_stripe", width=0.5)
        state = build_initial_state(demo_config(n=64, initial_condition=ic))
        vals = state.phi.values
        length = 2 * PI
        w = 0.5 * np.sqrt(2.0)
        yy = state.grid.y
        expected = (
            np.tanh((yy - 0.25 * length) / w)
            - np.tanh((yy - 0.75 * length) / w)
            - 1.0
        )
        np.testing.assert_array_equal(vals, expected)
        assert state.u.max_abs() == 0.0
        assert state.omega.max_abs() == 0.0
        # inside the stripe phi sits near +1, outside near -1
        assert vals[0, 32] > 0.9
        assert vals[0, 0] < -0.9


class TestCoupledStep:
    def test_composition_of_substeps(self):
        config = demo_config(n=32)
        params = config.params
        state = build_initial_state(config)
        opts = CoupledStepOptions.from_params(params)
        dt = 1e-3

        out = coupled_step(state, dt, opts, params)

        phi_next, mu_next = ch_step(state.phi, state.u, opts.ch(dt), params)
        mid = State(time=state.time, u=state.u, omega=state.omega,
                    phi=phi_next, mu=mu_next, p=state.p)
        u_next, p_next = momentum_step(mid, mu_next, opts.flow(dt), params)
        omega_next = microrotation_step(mid, u_next, mu_next, opts.flow(dt), params)

        np.testing.assert_array_equal(out.phi.values, phi_next.values)
        np.testing.assert_array_equal(out.u.x.values, u_next.x.values)
        np.testing.assert_array_equal(out.u.y.values, u_next.y.values)
        np.testing.assert_array_equal(out.omega.values, omega_next.values)
        np.testing.assert_array_equal(out.p.values, p_next.values)
        assert out.time == state.time + dt

    def test_pure_phase_rest_state_is_stationary(self):
        params = demo_params()
        ic = InitialCondition(phi_mean=1.0)
        config = demo_config(n=16, initial_condition=ic)
        state = build_initial_state(config)
        opts = CoupledStepOptions.from_params(params)
        start = state.phi.coeffs.copy()
        for _ in range(3):
            state = coupled_step(state, 1e-3, opts, params)
        np.testing.assert_array_equal(state.phi.coeffs, start)
        assert state.u.max_abs() == 0.0
        assert state.omega.max_abs() == 0.0

    def test_parity_symmetry_is_preserved(self):
        # even phi and omega, odd u: the discretization commutes with the
        # point reflection, so twenty steps keep the symmetry to roundoff
        ic = InitialCondition(
            phi_mean=0.05,
            phi_modes=(ModeSpec(1, 0, 0.3), ModeSpec(1, 1, 0.2)),
            psi_modes=(ModeSpec(0, 1, 0.1), ModeSpec(2, 1, 0.05)),
            omega_modes=(ModeSpec(1, 0, 0.2),),
        )
        config = demo_config(n=16, initial_condition=ic)
        params = config.params
        state = build_initial_state(config)
        opts = CoupledStepOptions.from_params(params)
        for _ in range(20):
            state = coupled_step(state, 1e-3, opts, params)
        assert np.max(np.abs(state.phi.values - reflect(state.phi.values))) <= 1e-11
        assert np.max(np.abs(state.omega.values - reflect(state.omega.values))) <= 1e-11
        assert np.max(np.abs(state.u.x.values + reflect(state.u.x.values))) <= 1e-11
        assert np.max(np.abs(state.u.y.values + reflect(state.u.y.values))) <= 1e-11


class TestRunLoop:
    def test_zero_horizon_records_initial_row(self):
        result = run(demo_config(n=16, t_end=0.0))
        assert len(result.ledger.rows) == 1
        assert result.final_state.time == 0.0
        assert result.ledger.rows[0].energy_residual == 0.0

    def test_step_count_and_exact_landing(self):
        steps = []
        config = demo_config(n=16, dt=1e-3, t_end=0.25)
        result = run(config, state_hook=lambda s: steps.append(s.time))
        assert len(steps) == 251
        assert result.final_state.time == 0.25
        assert len(result.ledger.rows) == 251
        assert result.ledger.rows[-1].t == 0.25

    def test_oversized_dt_is_absorbed_into_one_step(self):
        config = demo_config(n=16, dt=1.0, t_end=0.01)
        hook_count = [0]
        result = run(config, state_hook=lambda s: hook_count.__setitem__(0, hook_count[0] + 1))
        assert hook_count[0] == 2
        assert result.final_state.time == 0.01

    def test_determinism(self):
        config = demo_config(n=16, t_end=0.02)
        a = run(config)
        b = run(config)
        assert a.ledger.rows == b.ledger.rows
        np.testing.assert_array_equal(
            a.final_state.phi.values, b.final_state.phi.values
        )
        np.testing.assert_array_equal(
            a.final_state.u.x.values, b.final_state.u.x.values
        )
        np.testing.assert_array_equal(
            a.final_state.omega.values, b.final_state.omega.values
        )

    def test_ledger_row_identities(self):
        result = run(demo_config(n=16, t_end=0.01))
        grid = result.final_state.grid
        for row in result.ledger.rows:
            assert row.e_total == (
                row.e_kin_u + row.e_kin_omega + row.e_grad + row.e_pot
            )
            assert row.d_total == (
                row.d_mu + row.d_visc + row.d_rot + row.d_omega
            )
            assert row.separation <= 1.0
            assert row.div_residual <= 1e-10
        final_row = result.ledger.rows[-1]
        state = result.final_state
        assert final_row.mass == state.phi.mean() * grid.box_length**2
        assert final_row.separation == 1.0 - state.phi.max_abs()

    def test_energy_is_monotone_on_the_demo(self):
        result = run(demo_config(n=64, dt=1e-3, t_end=0.25))
        rows = result.ledger.rows
        slack = 1e-10 * (1.0 + abs(rows[0].e_total))
        for prev, cur in zip(rows, rows[1:]):
            assert cur.e_total <= prev.e_total + slack

    def test_energy_residual_is_first_order_in_dt(self):
        config = demo_config(n=32, t_end=0.05)
        coarse = run(config_with(config, dt=2e-3))
        fine = run(config_with(config, dt=1e-3))

        def mean_residual(result):
            rows = result.ledger.rows[1:]
            return np.mean([abs(r.energy_residual) for r in rows])

        ratio = mean_residual(coarse) / mean_residual(fine)
        assert 1.6 <= ratio <= 2.4

    def test_adaptive_dt_respects_cfl(self):
        config = demo_config(n=16, t_end=0.01, adaptive_dt=True, cfl_number=0.2)
        times = []
        run(config, state_hook=lambda s: times.append(s.time))
        increments = np.diff(times)
        assert np.all(increments > 0)
        assert np.max(increments) <= config.dt * (1.0 + 1e-9)


class TestRunOutputs:
    def test_files_written(self, tmp_path):
        out = tmp_path / "demo"
        config = demo_config(
            n=16, t_end=6e-3, output=OutputConfig(snapshot_every=2)
        )
        run(config, out_dir=str(out))
        assert (out / "ledger.csv").is_file()
        assert (out / "final_state.bin").is_file()
        assert (out / "energy_budget.png").is_file()
        assert (out / "final_fields.png").is_file()
        snaps = sorted(os.listdir(out / "snapshots"))
        assert snaps == ["step_00000002.bin", "step_00000004.bin",
                         "step_00000006.bin"]

    def test_failure_still_writes_partial_outputs(self, tmp_path):
        out = tmp_path / "crash"
        ic = InitialCondition(psi_modes=(ModeSpec(1, 0, 2.0),))
        config = demo_config(
            n=16, dt=0.25, t_end=1.0, adaptive_dt=False, initial_condition=ic
        )
        with pytest.raises(CflViolation):
            run(config, out_dir=str(out))
        assert (out / "failed_state.bin").is_file()
        assert (out / "ledger.csv").is_file()
