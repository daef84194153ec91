"""Trajectory comparison and the consistency experiments.

The two sweeps quantify how the full model collapses onto its limits:
the nonpolar sweep drives the rotational viscosity to zero against an
AGG reference, the matched-density sweep drives the density contrast to
zero against a Model H reference.  Errors combine sup-in-time squared
norms of the velocity gap (L2), micro-rotation gap (L2) and phase gap
(H2); slopes come from an ordinary least-squares fit in log-log space.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .model import AGG, MAGG, MODELH
from .simulation import SimConfig, run
from .spectral import (
    Field,
    check_same_grid,
    l2_norm_sq,
    make_grid,
    restrict_coeffs,
    sobolev_norm_sq,
)


@dataclass(frozen=True)
class DiffReport:
    """Sup-in-time squared gaps between two sampled trajectories."""

    sup_u_l2_sq: float
    sup_omega_l2_sq: float
    sup_phi_h2_sq: float
    sample_times: tuple

    @property
    def combined(self) -> float:
        return self.sup_u_l2_sq + self.sup_omega_l2_sq + self.sup_phi_h2_sq


class DiffAccumulator:
    """Feeds pairs of states (matching times) and keeps running suprema."""

    def __init__(self):
        self.sup_u = 0.0
        self.sup_omega = 0.0
        self.sup_phi = 0.0
        self.times = []

    def update(self, state_a, state_b):
        grid = check_same_grid(state_a.phi, state_b.phi)
        du = l2_norm_sq(
            Field.from_values(grid, state_a.u.x.values - state_b.u.x.values)
        ) + l2_norm_sq(
            Field.from_values(grid, state_a.u.y.values - state_b.u.y.values)
        )
        dom = l2_norm_sq(
            Field.from_values(grid, state_a.omega.values - state_b.omega.values)
        )
        dphi = sobolev_norm_sq(
            Field.from_values(grid, state_a.phi.values - state_b.phi.values), 2
        )
        self.sup_u = max(self.sup_u, du)
        self.sup_omega = max(self.sup_omega, dom)
        self.sup_phi = max(self.sup_phi, dphi)
        self.times.append(state_a.time)

    def finalize(self) -> DiffReport:
        return DiffReport(
            sup_u_l2_sq=self.sup_u,
            sup_omega_l2_sq=self.sup_omega,
            sup_phi_h2_sq=self.sup_phi,
            sample_times=tuple(self.times),
        )


def difference_norms(state_a, state_b) -> DiffReport:
    """One-shot DiffReport for a single pair of states."""
    acc = DiffAccumulator()
    acc.update(state_a, state_b)
    return acc.finalize()


def fit_loglog(x, y):
    """OLS slope and R^2 of log(y) against log(x)."""
    lx = np.log(np.asarray(x, dtype=np.float64))
    ly = np.log(np.asarray(y, dtype=np.float64))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return float(slope), r2


@dataclass(frozen=True)
class SweepReport:
    """Errors of a parameter sweep against its reference trajectory."""

    parameter_values: tuple
    errors: tuple
    fitted_slope: float
    fit_r2: float
    config_digest: str


class _Trajectory:
    """Stores sampled raw field values of a reference run."""

    def __init__(self):
        self.samples = []

    def __call__(self, state):
        self.samples.append(
            (
                state.time,
                state.u.x.values.copy(),
                state.u.y.values.copy(),
                state.omega.values.copy(),
                state.phi.values.copy(),
            )
        )


class _CompareHook:
    """Accumulates diffs against a stored reference, sample by sample."""

    def __init__(self, reference: _Trajectory, grid):
        self.reference = reference
        self.grid = grid
        self.index = 0
        self.acc = DiffAccumulator()

    def __call__(self, state):
        t, ux, uy, om, phi = self.reference.samples[self.index]
        self.index += 1
        if abs(t - state.time) > 1e-12:
            raise ConfigError(
                f"sweep sampling misaligned: reference t={t}, run t={state.time}; "
                "sweeps need a fixed dt schedule"
            )
        grid = self.grid
        du = l2_norm_sq(Field.from_values(grid, state.u.x.values - ux)) + l2_norm_sq(
            Field.from_values(grid, state.u.y.values - uy)
        )
        dom = l2_norm_sq(Field.from_values(grid, state.omega.values - om))
        dphi = sobolev_norm_sq(Field.from_values(grid, state.phi.values - phi), 2)
        self.acc.sup_u = max(self.acc.sup_u, du)
        self.acc.sup_omega = max(self.acc.sup_omega, dom)
        self.acc.sup_phi = max(self.acc.sup_phi, dphi)
        self.acc.times.append(state.time)


def _fixed_dt(config: SimConfig) -> SimConfig:
    return replace(config, adaptive_dt=False)


def _run_against_reference(args):
    config, reference = args
    grid = make_grid(config.n, config.box_length)
    hook = _CompareHook(reference, grid)
    run(config, state_hook=hook)
    return hook.acc.finalize()


def _sweep(base_config: SimConfig, run_configs, reference_config, values,
           fit_values, workers: int = 1) -> SweepReport:
    from .io import config_digest

    reference = _Trajectory()
    run(_fixed_dt(reference_config), state_hook=reference)

    jobs = [(_fixed_dt(c), reference) for c in run_configs]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_against_reference, jobs))
    else:
        reports = [_run_against_reference(j) for j in jobs]

    errors = tuple(r.combined for r in reports)
    if len(values) >= 2:
        slope, r2 = fit_loglog(fit_values, errors)
    else:
        slope, r2 = float("nan"), float("nan")
    return SweepReport(
        parameter_values=tuple(values),
        errors=errors,
        fitted_slope=slope,
        fit_r2=r2,
        config_digest=config_digest(base_config),
    )


def _require_zero_omega(config: SimConfig, what: str):
    ic = config.initial_condition
    if ic.kind == "uniform_plus_modes" and len(ic.omega_modes) > 0:
        raise ConfigError(f"{what} requires omega = 0 initial data")


def etar_sweep(base_config: SimConfig, etar_values, workers: int = 1) -> SweepReport:
    """Nonpolar-limit sweep: MAGG trajectories at constant eta_r against the
    AGG reference, identical seed/grid/dt schedule, errors per eta_r."""
    values = [float(v) for v in etar_values]
    if any(v <= 0 for v in values):
        raise ConfigError("eta_r sweep values must be positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError("eta_r sweep values must be strictly decreasing")
    if base_config.params.eta_r[0] != base_config.params.eta_r[1]:
        raise ConfigError("eta_r sweep needs constant eta_r (equal phase values)")
    _require_zero_omega(base_config, "the nonpolar sweep")

    reference_config = replace(
        base_config, params=replace(base_config.params, variant=AGG)
    )
    run_configs = [
        replace(base_config,
                params=replace(base_config.params, variant=MAGG, eta_r=(v, v)))
        for v in values
    ]
    return _sweep(base_config, run_configs, reference_config, values, values, workers)


def modelh_sweep(base_config: SimConfig, mismatch_values, workers: int = 1
                 ) -> SweepReport:
    """Matched-density sweep: MAGG at density contrast drho (mean held at
    rho_bar) and small constant eta_r against the Model H reference; the
    slope is fitted against eta_r + drho."""
    values = [float(v) for v in mismatch_values]
    if any(v <= 0 for v in values):
        raise ConfigError("density mismatch values must be positive")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ConfigError("density mismatch values must be strictly decreasing")
    params = base_config.params
    if params.eta_r[0] != params.eta_r[1]:
        raise ConfigError("matched-density sweep needs constant eta_r")
    eta_r = params.eta_r[0]
    if eta_r > min(values):
        raise ConfigError(
            f"eta_r={eta_r} must not exceed the smallest mismatch {min(values)}"
        )
    _require_zero_omega(base_config, "the matched-density sweep")

    rho_bar = 0.5 * (params.rho[0] + params.rho[1])
    reference_config = replace(
        base_config,
        params=replace(params, variant=MODELH, rho_bar=rho_bar, eta_r=(0.0, 0.0)),
    )
    run_configs = [
        replace(
            base_config,
            params=replace(
                params,
                variant=MAGG,
                rho=(rho_bar + 0.5 * v, rho_bar - 0.5 * v),
            ),
        )
        for v in values
    ]
    fit_values = [eta_r + v for v in values]
    return _sweep(base_config, run_configs, reference_config, values, fit_values,
                  workers)


def decoupling_identity(base_config: SimConfig) -> DiffReport:
    """MAGG with eta_r = 0 and omega0 = 0 against the AGG variant: the
    rotational code paths contribute exact zeros, so the gap is roundoff."""
    _require_zero_omega(base_config, "the decoupling identity")
    magg_config = _fixed_dt(
        replace(base_config,
                params=replace(base_config.params, variant=MAGG, eta_r=(0.0, 0.0)))
    )
    agg_config = _fixed_dt(
        replace(base_config, params=replace(base_config.params, variant=AGG))
    )
    reference = _Trajectory()
    run(agg_config, state_hook=reference)
    grid = make_grid(base_config.n, base_config.box_length)
    hook = _CompareHook(reference, grid)
    run(magg_config, state_hook=hook)
    return hook.acc.finalize()


@dataclass(frozen=True)
class EnergyOrderReport:
    """Max energy-law residual per dt and the measured convergence order."""

    dt_values: tuple
    max_residuals: tuple
    ratios: tuple
    fitted_order: float
    skipped: bool


def energy_order(base_config: SimConfig, dt_values) -> EnergyOrderReport:
    """Short fixed-dt trajectories per dt; the energy residual should shrink
    at first order.  Equilibrium data leaves residuals at roundoff; the fit
    is then skipped and flagged."""
    dts = [float(v) for v in dt_values]
    if any(v <= 0 for v in dts):
        raise ConfigError("dt values must be positive")
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ConfigError("dt values must be strictly decreasing")
    max_residuals = []
    for dt in dts:
        result = run(_fixed_dt(replace(base_config, dt=dt)))
        resid = max(abs(r.energy_residual) for r in result.ledger.rows[1:])
        max_residuals.append(resid)
    scale = max(abs(r.e_total) for r in result.ledger.rows) + 1.0
    if max(max_residuals) <= 1e-10 * scale:
        return EnergyOrderReport(
            dt_values=tuple(dts),
            max_residuals=tuple(max_residuals),
            ratios=(),
            fitted_order=float("nan"),
            skipped=True,
        )
    ratios = tuple(a / b for a, b in zip(max_residuals, max_residuals[1:]))
    order, _ = fit_loglog(dts, max_residuals)
    return EnergyOrderReport(
        dt_values=tuple(dts),
        max_residuals=tuple(max_residuals),
        ratios=ratios,
        fitted_order=order,
        skipped=False,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    """Final-time gaps between each grid and the finest one."""

    grid_sizes: tuple
    errors: tuple
    reference_n: int


def spatial_convergence(base_config: SimConfig, grid_sizes) -> ConvergenceReport:
    """Run the same configuration on each grid with the same dt schedule and
    compare final states after projecting the finest run onto each grid."""
    ns = sorted(int(n) for n in grid_sizes)
    if len(ns) < 2:
        raise ConfigError("need at least two grid sizes")
    if len(set(ns)) != len(ns):
        raise ConfigError("grid sizes must be distinct")
    finest = ns[-1]
    finals = {}
    for n in ns:
        result = run(_fixed_dt(replace(base_config, n=n)))
        finals[n] = result.final_state
    ref = finals[finest]
    errors = []
    for n in ns[:-1]:
        coarse = make_grid(n, base_config.box_length)
        ref_u = (
            restrict_coeffs(ref.u.x, coarse),
            restrict_coeffs(ref.u.y, coarse),
        )
        ref_om = restrict_coeffs(ref.omega, coarse)
        ref_phi = restrict_coeffs(ref.phi, coarse)
        st = finals[n]
        du = l2_norm_sq(
            Field.from_values(coarse, st.u.x.values - ref_u[0].values)
        ) + l2_norm_sq(Field.from_values(coarse, st.u.y.values - ref_u[1].values))
        dom = l2_norm_sq(Field.from_values(coarse, st.omega.values - ref_om.values))
        dphi = sobolev_norm_sq(
            Field.from_values(coarse, st.phi.values - ref_phi.values), 2
        )
        errors.append(math.sqrt(du + dom + dphi))
    return ConvergenceReport(
        grid_sizes=tuple(ns), errors=tuple(errors), reference_n=finest
    )
