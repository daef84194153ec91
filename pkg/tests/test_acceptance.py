"""Ten end-to-end gates, one test per product guarantee.

Each test prints a single PASS/FAIL line with the measured number, so
`pytest tests/test_acceptance.py -v -s` reads as a checklist: exact mass
conservation, first-order energy-law residuals, the two limit-model rates,
strict phase separation under the logarithmic well, oracle agreement for
the transport and momentum steps, spectral self-convergence, and bit-level
reproducibility of runs, snapshots and restarts.
"""

import numpy as np

from conftest import (
    demo_config,
    demo_initial_condition,
    demo_params,
    rk4_reference,
)
from maggsim.cahn_hilliard import ch_step
from maggsim.diagnostics import (
    DiffAccumulator,
    decoupling_identity,
    energy_order,
    etar_sweep,
    modelh_sweep,
    spatial_convergence,
)
from maggsim.hydrodynamics import momentum_step
from maggsim.io import read_snapshot, write_snapshot
from maggsim.model import LOGARITHMIC, MODELH, make_state
from maggsim.simulation import (
    CoupledStepOptions,
    InitialCondition,
    ModeSpec,
    OutputConfig,
    build_initial_state,
    config_with,
    run,
)
from maggsim.spectral import Field, VecField, divergence, l2_norm_sq, make_grid


def _verdict(num, name, ok, detail):
    print(f"criterion {num:02d} ({name}): {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, f"{name}: {detail}"


def test_criterion_01_mass_conservation():
    config = demo_config(n=64, dt=1e-3, t_end=2.0)
    result = run(config)
    rows = result.ledger.rows
    area = config.box_length**2
    drift = max(abs(r.mass - rows[0].mass) for r in rows) / area
    _verdict(1, "mass conservation", drift <= 1e-12,
             f"max |mean drift| = {drift:.3e} over {len(rows) - 1} steps (tol 1e-12)")


def test_criterion_02_energy_law_order():
    report = energy_order(demo_config(n=64, t_end=0.1), (2e-3, 1e-3, 5e-4))
    ok = (not report.skipped) and all(1.6 <= r <= 2.4 for r in report.ratios)
    ratios = ", ".join(f"{r:.3f}" for r in report.ratios)
    _verdict(2, "energy-law order", ok,
             f"residual ratios per dt halving = [{ratios}] (window [1.6, 2.4])")


def test_criterion_03_decoupling_identity():
    gap = decoupling_identity(demo_config(n=64, t_end=0.05)).combined
    _verdict(3, "nonpolar decoupling", gap <= 1e-14,
             f"combined trajectory gap = {gap:.3e} (tol 1e-14)")


def test_criterion_04_etar_limit_rate():
    base = demo_config(n=64, t_end=0.25, params=demo_params(eta_r=(0.1, 0.1)))
    report = etar_sweep(base, (1e-1, 1e-2, 1e-3, 1e-4))
    ok = report.fitted_slope >= 0.9 and report.fit_r2 >= 0.98
    _verdict(4, "eta_r limit rate", ok,
             f"slope = {report.fitted_slope:.3f}, R^2 = {report.fit_r2:.5f}"
             " (need slope >= 0.9, R^2 >= 0.98)")


def test_criterion_05_matched_density_rate():
    base = demo_config(n=64, t_end=0.25, params=demo_params(eta_r=(1e-6, 1e-6)))
    report = modelh_sweep(base, (0.2, 0.1, 0.05, 0.025))

    zero_base = demo_config(n=32, t_end=0.05)
    matched = config_with(
        zero_base, params=demo_params(rho=(2.0, 2.0), eta_r=(0.0, 0.0))
    )
    collapsed = config_with(
        zero_base,
        params=demo_params(variant=MODELH, rho_bar=2.0, eta_r=(0.0, 0.0)),
    )
    reference_states = []
    run(collapsed, state_hook=reference_states.append)
    acc = DiffAccumulator()
    counter = iter(reference_states)
    run(matched, state_hook=lambda s: acc.update(next(counter), s))
    zero_gap = acc.finalize().combined

    ok = report.fitted_slope >= 0.9 and zero_gap <= 1e-14
    _verdict(5, "matched-density rate", ok,
             f"slope = {report.fitted_slope:.3f} (need >= 0.9), "
             f"zero-mismatch gap = {zero_gap:.3e} (tol 1e-14)")


def test_criterion_06_strict_separation():
    ic = demo_initial_condition(
        phi_modes=(
            ModeSpec(1, 0, 0.5, 0.3),
            ModeSpec(0, 2, 0.3, 1.1),
            ModeSpec(2, 1, 0.1, 2.0),
        )
    )
    config = demo_config(
        n=64,
        t_end=0.1,
        params=demo_params(potential=LOGARITHMIC),
        initial_condition=ic,
    )
    result = run(config)
    margin = min(r.separation for r in result.ledger.rows)
    _verdict(6, "strict separation", margin >= 1e-4,
             f"min margin 1 - max|phi| = {margin:.4f} (tol 1e-4)")


def test_criterion_07_transport_oracle():
    params = demo_params()
    grid = make_grid(16, 2.0 * np.pi)
    state = build_initial_state(demo_config(n=16), grid)
    dt = 1e-5
    opts = CoupledStepOptions.from_params(params).ch(dt)
    phi_next, _ = ch_step(state.phi, state.u, opts, params)
    reference = rk4_reference(state.phi, state.u, params, dt, 1e-7)
    rel = np.max(np.abs(phi_next.values - reference.values)) / np.max(
        np.abs(reference.values)
    )
    _verdict(7, "transport oracle", rel <= 1e-6,
             f"one-step relative max-norm gap = {rel:.3e} (tol 1e-6)")


def test_criterion_08_spectral_self_convergence():
    report = spatial_convergence(demo_config(t_end=0.05), (32, 64, 128))
    ok = report.errors[1] <= report.errors[0] / 10.0
    _verdict(8, "spectral self-convergence", ok,
             f"gap(64 vs 128) = {report.errors[1]:.3e} <= "
             f"gap(32 vs 128)/10 = {report.errors[0] / 10.0:.3e}")


def test_criterion_09_taylor_green_amplification():
    nu = 0.7
    dt = 1e-2
    params = demo_params(rho=(1.0, 1.0), eta=(nu, nu), eta_r=(0.0, 0.0))
    grid = make_grid(64, 2.0 * np.pi)
    u0 = VecField(
        Field.from_values(grid, np.sin(grid.x) * np.cos(grid.y)),
        Field.from_values(grid, -np.cos(grid.x) * np.sin(grid.y)),
    )
    state = make_state(u0, Field.zeros(grid), Field.zeros(grid), params)
    opts = CoupledStepOptions.from_params(params).flow(dt)
    u_next, _ = momentum_step(state, state.mu, opts, params)

    factor = 1.0 / (1.0 + 2.0 * nu * dt)
    gap = max(
        np.max(np.abs(u_next.x.values - factor * u0.x.values)),
        np.max(np.abs(u_next.y.values - factor * u0.y.values)),
    ) / factor
    div = divergence(u_next)
    u_norm_sq = l2_norm_sq(u_next.x) + l2_norm_sq(u_next.y)
    residual = np.sqrt(l2_norm_sq(div) / u_norm_sq)
    ok = gap <= 1e-12 and residual <= 1e-13
    _verdict(9, "Taylor-Green amplification", ok,
             f"factor gap = {gap:.3e} (tol 1e-12), "
             f"divergence residual = {residual:.3e} (tol 1e-13)")


def test_criterion_10_determinism_persistence(tmp_path):
    config = demo_config(
        n=32, t_end=0.02, output=OutputConfig(snapshot_every=10)
    )
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    run(config, out_dir=str(out_a))
    run(config, out_dir=str(out_b))
    same_ledger = (
        (out_a / "ledger.csv").read_bytes() == (out_b / "ledger.csv").read_bytes()
    )
    same_final = (
        (out_a / "final_state.bin").read_bytes()
        == (out_b / "final_state.bin").read_bytes()
    )

    final = read_snapshot(out_a / "final_state.bin", config.params)
    rewritten = tmp_path / "rt.bin"
    write_snapshot(final, rewritten)
    round_trip = rewritten.read_bytes() == (out_a / "final_state.bin").read_bytes()

    resume_ic = InitialCondition(
        kind="from_snapshot",
        path=str(out_a / "snapshots" / "step_00000010.bin"),
    )
    resumed = run(config_with(config, initial_condition=resume_ic,
                              output=OutputConfig()))
    restart_gap = max(
        np.max(np.abs(a.values - b.values))
        for a, b in (
            (resumed.final_state.phi, final.phi),
            (resumed.final_state.omega, final.omega),
            (resumed.final_state.u.x, final.u.x),
            (resumed.final_state.u.y, final.u.y),
        )
    )

    ok = same_ledger and same_final and round_trip and restart_gap <= 1e-14
    _verdict(10, "determinism and persistence", ok,
             f"ledger identical = {same_ledger}, final identical = {same_final}, "
             f"round trip identical = {round_trip}, "
             f"restart gap = {restart_gap:.3e} (tol 1e-14)")
