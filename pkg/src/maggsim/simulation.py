"""Coupled time stepping, configuration and the per-step energy ledger.

Step ordering per time level: phase transport with the current velocity,
then momentum with the fresh chemical potential, then micro-rotation with
the fresh velocity.  The step size is the configured dt, optionally capped
by the advective CFL bound when adaptive_dt is on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cahn_hilliard import ChStepOptions, ch_step
from .errors import ConfigError
from .hydrodynamics import FlowStepOptions, microrotation_step, momentum_step
from .model import (
    ModelParams,
    State,
    dissipation,
    make_state,
    total_energy,
)
from .spectral import (
    TWO_THIRDS,
    Field,
    SpectralGrid,
    VecField,
    curl_vector,
    divergence,
    l2_norm_sq,
    make_grid,
)

UNIFORM_PLUS_MODES = "uniform_plus_modes"
TANH_STRIPE = "tanh_stripe"
FROM_SNAPSHOT = "from_snapshot"


@dataclass(frozen=True)
class ModeSpec:
    """One Fourier mode: integer wavevector, amplitude, phase."""

    kx: int
    ky: int
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class InitialCondition:
    """Initial data recipe.

    uniform_plus_modes: phi = phi_mean + cosine modes (+ optional seeded
    random-phase noise), velocity from streamfunction modes (u = curl psi,
    solenoidal by construction), omega from cosine modes.
    tanh_stripe: a horizontal two-interface stripe of the given width.
    from_snapshot: resume fields from a snapshot file.
    """

    kind: str = UNIFORM_PLUS_MODES
    phi_mean: float = 0.0
    phi_modes: tuple = ()
    psi_modes: tuple = ()
    omega_modes: tuple = ()
    noise_amplitude: float = 0.0
    noise_max_mode: int = 4
    width: float = 0.5
    path: str = ""

    def validate(self) -> "InitialCondition":
        if self.kind not in (UNIFORM_PLUS_MODES, TANH_STRIPE, FROM_SNAPSHOT):
            raise ConfigError(f"unknown initial condition kind {self.kind!r}")
        if self.kind == TANH_STRIPE and not (self.width > 0):
            raise ConfigError(f"stripe width must be positive, got {self.width}")
        if self.kind == FROM_SNAPSHOT and not self.path:
            raise ConfigError("from_snapshot initial condition needs a path")
        if self.noise_amplitude < 0:
            raise ConfigError("noise amplitude must be >= 0")
        return self


@dataclass(frozen=True)
class OutputConfig:
    ledger_every: int = 1
    snapshot_every: int = 0  # 0 keeps only the final snapshot

    def validate(self) -> "OutputConfig":
        if self.ledger_every < 1:
            raise ConfigError("ledger_every must be >= 1")
        if self.snapshot_every < 0:
            raise ConfigError("snapshot_every must be >= 0")
        return self


@dataclass(frozen=True)
class SimConfig:
    """Everything one run needs: grid, physics, stepping and output knobs."""

    n: int = 64
    box_length: float = 2.0 * math.pi
    params: ModelParams = field(default_factory=ModelParams)
    dt: float = 1e-3
    t_end: float = 0.25
    cfl_number: float = 0.4
    adaptive_dt: bool = True
    seed: int = 0
    output: OutputConfig = field(default_factory=OutputConfig)
    initial_condition: InitialCondition = field(default_factory=InitialCondition)

    def validate(self) -> "SimConfig":
        if self.n < 8 or self.n % 2:
            raise ConfigError(f"grid n must be even and >= 8, got {self.n}")
        if not (self.box_length > 0):
            raise ConfigError("box_length must be positive")
        if not (self.dt > 0):
            raise ConfigError("dt must be positive")
        if self.t_end < 0:
            raise ConfigError("t_end must be >= 0")
        if not (0 < self.cfl_number <= 1):
            raise ConfigError(f"cfl_number must be in (0, 1], got {self.cfl_number}")
        self.params.validate()
        self.output.validate()
        self.initial_condition.validate()
        return self


@dataclass(frozen=True)
class CoupledStepOptions:
    """Per-run stepper knobs shared by the sub-steps (dt is supplied per step)."""

    alpha: float = 0.0
    stabilization: float = 0.0
    implicit_viscosity: float | None = None
    implicit_omega_diffusion: float | None = None
    pressure_iterations: int = 0
    dealias_rule: str = TWO_THIRDS

    @classmethod
    def from_params(cls, params: ModelParams) -> "CoupledStepOptions":
        return cls(alpha=params.alpha, stabilization=params.stabilization_value())

    def ch(self, dt: float) -> ChStepOptions:
        return ChStepOptions(
            dt=dt,
            alpha=self.alpha,
            stabilization=self.stabilization,
            dealias_rule=self.dealias_rule,
        )

    def flow(self, dt: float) -> FlowStepOptions:
        return FlowStepOptions(
            dt=dt,
            implicit_viscosity=self.implicit_viscosity,
            implicit_omega_diffusion=self.implicit_omega_diffusion,
            pressure_iterations=self.pressure_iterations,
            dealias_rule=self.dealias_rule,
        )


def coupled_step(state: State, dt: float, opts: CoupledStepOptions,
                 params: ModelParams) -> State:
    """Advance the full system by dt: phase field, velocity, micro-rotation."""
    phi_next, mu_next = ch_step(state.phi, state.u, opts.ch(dt), params)
    mid = State(time=state.time, u=state.u, omega=state.omega,
                phi=phi_next, mu=mu_next, p=state.p)
    u_next, p_next = momentum_step(mid, mu_next, opts.flow(dt), params)
    omega_next = microrotation_step(mid, u_next, mu_next, opts.flow(dt), params)
    return State(time=state.time + dt, u=u_next, omega=omega_next,
                 phi=phi_next, mu=mu_next, p=p_next)


def cfl_dt(state: State, cfl_number: float, grid: SpectralGrid,
           dt_cap: float) -> float:
    """dt = C * h / max(max|u|, 1e-8), never above the configured cap."""
    advective = cfl_number * grid.spacing / max(state.u.max_abs(), 1e-8)
    return min(dt_cap, advective)


def _cosine_sum(grid: SpectralGrid, modes) -> np.ndarray:
    out = np.zeros((grid.n, grid.n))
    scale = 2.0 * np.pi / grid.box_length
    for m in modes:
        out += m.amplitude * np.cos(
            scale * (m.kx * grid.x + m.ky * grid.y) + m.phase
        )
    return out


def build_initial_state(config: SimConfig, grid: SpectralGrid | None = None) -> State:
    """Sample the configured initial data on the grid and assemble a State."""
    if grid is None:
        grid = make_grid(config.n, config.box_length)
    ic = config.initial_condition
    params = config.params
    if ic.kind == FROM_SNAPSHOT:
        from .io import read_snapshot

        return read_snapshot(ic.path, params)
    if ic.kind == TANH_STRIPE:
        length = grid.box_length
        w = ic.width * math.sqrt(2.0)
        yy = grid.y
        phi_vals = (
            np.tanh((yy - 0.25 * length) / w)
            - np.tanh((yy - 0.75 * length) / w)
            - 1.0
        )
        phi = Field.from_values(grid, phi_vals)
        u = VecField(Field.zeros(grid), Field.zeros(grid))
        omega = Field.zeros(grid)
        return make_state(u, omega, phi, params)

    phi_vals = ic.phi_mean + _cosine_sum(grid, ic.phi_modes)
    if ic.noise_amplitude > 0:
        rng = np.random.default_rng(config.seed)
        kmax = ic.noise_max_mode
        noise = np.zeros_like(phi_vals)
        scale = 2.0 * np.pi / grid.box_length
        for mx in range(-kmax, kmax + 1):
            for my in range(0, kmax + 1):
                if my == 0 and mx <= 0:
                    continue
                amp = rng.uniform(-1.0, 1.0)
                phase = rng.uniform(0.0, 2.0 * np.pi)
                noise += amp * np.cos(scale * (mx * grid.x + my * grid.y) + phase)
        peak = np.max(np.abs(noise))
        if peak > 0:
            phi_vals = phi_vals + ic.noise_amplitude * noise / peak
    phi = Field.from_values(grid, phi_vals)
    psi = Field.from_values(grid, _cosine_sum(grid, ic.psi_modes))
    u = curl_vector(psi)
    omega = Field.from_values(grid, _cosine_sum(grid, ic.omega_modes))
    return make_state(u, omega, phi, params)


@dataclass(frozen=True)
class LedgerRow:
    """One diagnostics record: time, energy and dissipation pieces, mass,
    separation margin, velocity peak, divergence residual and the discrete
    energy-law residual (E_next - E_prev)/dt + D_next."""

    t: float
    e_total: float
    e_kin_u: float
    e_kin_omega: float
    e_grad: float
    e_pot: float
    d_total: float
    d_mu: float
    d_visc: float
    d_rot: float
    d_omega: float
    mass: float
    separation: float
    max_u: float
    div_residual: float
    energy_residual: float


class EnergyLedger:
    """Accumulates LedgerRows along a run."""

    def __init__(self, params: ModelParams):
        self.params = params
        self.rows: list[LedgerRow] = []
        self._prev_e = None
        self._prev_t = None

    def record(self, state: State) -> LedgerRow:
        params = self.params
        grid = state.grid
        e = total_energy(state, params)
        d = dissipation(state, params)
        div = divergence(state.u)
        u_norm_sq = l2_norm_sq(state.u.x) + l2_norm_sq(state.u.y)
        div_res = (
            math.sqrt(l2_norm_sq(div) / u_norm_sq) if u_norm_sq > 0 else 0.0
        )
        if self._prev_e is None:
            residual = 0.0
        else:
            dt = state.time - self._prev_t
            residual = (e.total - self._prev_e) / dt + d.total if dt > 0 else 0.0
        row = LedgerRow(
            t=state.time,
            e_total=e.total,
            e_kin_u=e.kinetic_u,
            e_kin_omega=e.kinetic_omega,
            e_grad=e.gradient,
            e_pot=e.potential,
            d_total=d.total,
            d_mu=d.mu_grad,
            d_visc=d.viscous_sym,
            d_rot=d.rotational_coupling,
            d_omega=d.omega_diffusion,
            mass=state.phi.mean() * grid.box_length**2,
            separation=1.0 - state.phi.max_abs(),
            max_u=state.u.max_abs(),
            div_residual=div_res,
            energy_residual=residual,
        )
        self.rows.append(row)
        self._prev_e = e.total
        self._prev_t = state.time
        return row


@dataclass
class RunResult:
    config: SimConfig
    final_state: State
    ledger: EnergyLedger


def run(config: SimConfig, out_dir=None, state_hook=None) -> RunResult:
    """Integrate from t=0 to t_end; optionally write ledger/snapshots/figures.

    state_hook(state) is called on the initial state and after every step;
    sweeps use it to accumulate trajectory differences without storing runs.
    On a solver error the partial ledger and a snapshot tagged "failed" are
    still written before the error propagates.
    """
    config.validate()
    grid = make_grid(config.n, config.box_length)
    params = config.params
    opts = CoupledStepOptions.from_params(params)
    state = build_initial_state(config, grid)
    ledger = EnergyLedger(params)
    ledger.record(state)
    if state_hook is not None:
        state_hook(state)

    t_end = config.t_end
    step_index = 0
    try:
        while state.time < t_end - 1e-14:
            if config.adaptive_dt:
                dt = cfl_dt(state, config.cfl_number, grid, config.dt)
            else:
                dt = config.dt
            remaining = t_end - state.time
            # absorb float slivers so the last step lands on t_end exactly
            if remaining <= dt * (1.0 + 1e-6):
                dt = remaining
            state = coupled_step(state, dt, opts, params)
            step_index += 1
            if step_index % config.output.ledger_every == 0:
                ledger.record(state)
            if state_hook is not None:
                state_hook(state)
            if (
                out_dir is not None
                and config.output.snapshot_every > 0
                and step_index % config.output.snapshot_every == 0
            ):
                _write_step_snapshot(state, out_dir, step_index)
    except Exception:
        if out_dir is not None:
            _write_failure(state, ledger, out_dir)
        raise
    if ledger.rows[-1].t < state.time - 1e-15:
        ledger.record(state)

    result = RunResult(config=config, final_state=state, ledger=ledger)
    if out_dir is not None:
        _write_outputs(result, out_dir)
    return result


def _write_step_snapshot(state, out_dir, step_index):
    import os

    from .io import write_snapshot

    snap_dir = os.path.join(out_dir, "snapshots")
    os.makedirs(snap_dir, exist_ok=True)
    write_snapshot(state, os.path.join(snap_dir, f"step_{step_index:08d}.bin"))


def _write_failure(state, ledger, out_dir):
    import os

    from .io import write_ledger_csv, write_snapshot

    os.makedirs(out_dir, exist_ok=True)
    write_snapshot(state, os.path.join(out_dir, "failed_state.bin"))
    write_ledger_csv(ledger.rows, os.path.join(out_dir, "ledger.csv"))


def _write_outputs(result: RunResult, out_dir):
    import os

    from .io import write_ledger_csv, write_snapshot
    from .plots import plot_fields, plot_run_summary

    os.makedirs(out_dir, exist_ok=True)
    write_ledger_csv(result.ledger.rows, os.path.join(out_dir, "ledger.csv"))
    write_snapshot(result.final_state, os.path.join(out_dir, "final_state.bin"))
    plot_run_summary(result.ledger.rows, os.path.join(out_dir, "energy_budget.png"))
    plot_fields(result.final_state, os.path.join(out_dir, "final_fields.png"))


def config_with(config: SimConfig, **overrides) -> SimConfig:
    """dataclasses.replace that also revalidates."""
    return replace(config, **overrides).validate()
