"""Shared builders for the test suite.

demo_* return the tuned smooth configuration the acceptance checks run on:
stratified phase data with max|phi0| = 0.8 and a gentle solenoidal velocity,
slow enough that the advective CFL bound never binds at dt = 1e-3.
rk4_reference is the brute-force time integrator used as the oracle for the
transport step.
"""

import numpy as np

from maggsim.cahn_hilliard import advection_term
from maggsim.model import ModelParams, potential_deriv
from maggsim.simulation import InitialCondition, ModeSpec, SimConfig
from maggsim.spectral import Field


def demo_params(**overrides) -> ModelParams:
    return ModelParams(**overrides).validate()


def demo_initial_condition(**overrides) -> InitialCondition:
    fields = dict(
        kind="uniform_plus_modes",
        phi_mean=0.0,
        phi_modes=(
            ModeSpec(1, 0, 0.35, 0.3),
            ModeSpec(0, 2, 0.25, 1.1),
            ModeSpec(2, 1, 0.2, 2.0),
        ),
        psi_modes=(ModeSpec(1, 1, 0.08, 0.5), ModeSpec(2, 0, 0.05, 1.7)),
    )
    fields.update(overrides)
    return InitialCondition(**fields).validate()


def demo_config(n=64, dt=1e-3, t_end=0.25, **overrides) -> SimConfig:
    fields = dict(
        n=n,
        params=demo_params(),
        dt=dt,
        t_end=t_end,
        adaptive_dt=False,
        initial_condition=demo_initial_condition(),
    )
    fields.update(overrides)
    return SimConfig(**fields).validate()


def random_smooth_phi(grid, rng, max_mode=3, peak=0.8, mean=0.0):
    """Seeded random superposition of low modes, rescaled to the given peak."""
    vals = np.zeros((grid.n, grid.n))
    scale = 2.0 * np.pi / grid.box_length
    for mx in range(-max_mode, max_mode + 1):
        for my in range(0, max_mode + 1):
            if my == 0 and mx <= 0:
                continue
            amp = rng.uniform(-1.0, 1.0)
            phase = rng.uniform(0.0, 2.0 * np.pi)
            vals += amp * np.cos(scale * (mx * grid.x + my * grid.y) + phase)
    top = np.max(np.abs(vals))
    if top > 0:
        vals *= peak / top
    return Field.from_values(grid, mean + vals)


def rk4_reference(phi0, u, params, total_time, inner_dt, rule="two_thirds"):
    """March the semi-discrete phase equation with classical RK4.

    The spatial treatment (masked potential derivative, masked advection
    with a killed zero mode) matches the production step exactly; only the
    time discretization differs, with error O(inner_dt^4).
    """
    grid = phi0.grid
    sig_eps = params.sigma * params.eps
    sig_ratio = params.sigma / params.eps
    mask = grid.mask(rule)

    def rhs(vals):
        phi = Field.from_values(grid, vals)
        adv = advection_term(phi, u, rule)
        fprime_hat = np.fft.fft2(potential_deriv(vals, params)) * mask
        mu_hat = sig_eps * grid.k2 * phi.coeffs + sig_ratio * fprime_hat
        lap_mu = np.fft.ifft2(-grid.k2 * mu_hat).real
        return -adv.values + lap_mu

    steps = round(total_time / inner_dt)
    vals = phi0.values.copy()
    for _ in range(steps):
        k1 = rhs(vals)
        k2 = rhs(vals + 0.5 * inner_dt * k1)
        k3 = rhs(vals + 0.5 * inner_dt * k2)
        k4 = rhs(vals + inner_dt * k3)
        vals = vals + (inner_dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return Field.from_values(grid, vals)
