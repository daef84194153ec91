"""Momentum and micro-rotation sub-steps.

Both steps treat a constant-coefficient diffusion implicitly (one diagonal
spectral solve) and everything else explicitly with lagged coefficients.
Incompressibility is enforced by a constant-density Leray projection of the
provisional velocity; the removed gradient, scaled by the reference density,
is the recovered pressure.  The micro-rotation relaxation is a pointwise
implicit second stage.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CflViolation, PositivityLoss
from .model import (
    ModelParams,
    State,
    c_sum_of_phi,
    capillary_force,
    check_positive,
    eta_of_phi,
    eta_r_of_phi,
    rho_of_phi,
)
from .spectral import (
    TWO_THIRDS,
    Field,
    VecField,
    check_same_grid,
    dealias,
    derivative,
    gradient,
    leray_project,
)
from .cahn_hilliard import advective_dt_limit


@dataclass(frozen=True)
class FlowStepOptions:
    """dt, the implicit constant coefficients (None picks the defaults
    min(eta)/max(rho) and min(cd+ca)/max(rho)), optional pressure
    fixed-point iterations and the dealiasing rule."""

    dt: float
    implicit_viscosity: float | None = None
    implicit_omega_diffusion: float | None = None
    pressure_iterations: int = 0
    dealias_rule: str = TWO_THIRDS

    def nu_bar(self, params: ModelParams) -> float:
        if self.implicit_viscosity is not None:
            return self.implicit_viscosity
        return min(params.eta) / max(params.rho_pair())

    def c_bar(self, params: ModelParams) -> float:
        if self.implicit_omega_diffusion is not None:
            return self.implicit_omega_diffusion
        return min(params.c_sum_pair()) / max(params.rho_pair())


def _grad_components(f: Field):
    return derivative(f, 0).values, derivative(f, 1).values


def momentum_rhs_explicit(state: State, mu: Field, opts: FlowStepOptions,
                          params: ModelParams) -> VecField:
    """Everything of du/dt except pressure and the implicit nu_bar*Lap(u).

    G = -(u.grad)u + (1/rho)[div(2 eta Du + 2 eta_r Wu) + 2 curl(eta_r omega)
        + rho'(grad mu . grad)u + mu grad phi] - nu_bar*Lap(u)
    """
    grid = check_same_grid(state.u.x, state.phi, mu)
    rule = opts.dealias_rule
    mask = grid.mask(rule)
    phi = state.phi
    u = state.u

    rho = rho_of_phi(phi, params)
    check_positive(rho, "density rho(phi)")
    eta = eta_of_phi(phi, params)
    check_positive(eta, "viscosity eta(phi)")
    eta_r = eta_r_of_phi(phi, params)
    eta_r_min = float(np.min(eta_r.values))
    if eta_r_min < 0:
        raise PositivityLoss(
            f"rotational viscosity eta_r(phi) reached {eta_r_min:.6g}; "
            "must stay nonnegative"
        )

    ux_x, ux_y = _grad_components(u.x)
    uy_x, uy_y = _grad_components(u.y)

    # advection (u.grad)u
    conv_x = u.x.values * ux_x + u.y.values * ux_y
    conv_y = u.x.values * uy_x + u.y.values * uy_y

    # div(2 eta Du): T11 = 2 eta ux_x, T12 = eta (ux_y + uy_x), T22 = 2 eta uy_y
    t11 = Field.from_coeffs(grid, np.fft.fft2(2.0 * eta.values * ux_x) * mask)
    t12 = Field.from_coeffs(grid, np.fft.fft2(eta.values * (ux_y + uy_x)) * mask)
    t22 = Field.from_coeffs(grid, np.fft.fft2(2.0 * eta.values * uy_y) * mask)
    div_sym_x = derivative(t11, 0).values + derivative(t12, 1).values
    div_sym_y = derivative(t12, 0).values + derivative(t22, 1).values

    # div(2 eta_r Wu) = (-d_y a, d_x a) with a = eta_r * curl u
    a = Field.from_coeffs(grid, np.fft.fft2(eta_r.values * (uy_x - ux_y)) * mask)
    div_skew_x = -derivative(a, 1).values
    div_skew_y = derivative(a, 0).values

    # 2 curl(eta_r omega) = 2 (d_y, -d_x)(eta_r omega)
    b = Field.from_coeffs(grid, np.fft.fft2(eta_r.values * state.omega.values) * mask)
    rot_force_x = 2.0 * derivative(b, 1).values
    rot_force_y = -2.0 * derivative(b, 0).values

    # rho' (grad mu . grad) u
    rp = params.rho_prime()
    mu_x, mu_y = _grad_components(mu)
    flux_x = rp * (mu_x * ux_x + mu_y * ux_y)
    flux_y = rp * (mu_x * uy_x + mu_y * uy_y)

    cap = capillary_force(phi, mu, rule)

    inv_rho = 1.0 / rho.values
    nu_bar = opts.nu_bar(params)
    lap_ux = Field.from_coeffs(grid, -grid.k2 * u.x.coeffs).values
    lap_uy = Field.from_coeffs(grid, -grid.k2 * u.y.coeffs).values

    gx = (
        -conv_x
        + inv_rho * (div_sym_x + div_skew_x + rot_force_x + flux_x + cap.x.values)
        - nu_bar * lap_ux
    )
    gy = (
        -conv_y
        + inv_rho * (div_sym_y + div_skew_y + rot_force_y + flux_y + cap.y.values)
        - nu_bar * lap_uy
    )
    return VecField(
        dealias(Field.from_values(grid, gx), rule),
        dealias(Field.from_values(grid, gy), rule),
    )


def momentum_step(state: State, mu: Field, opts: FlowStepOptions,
                  params: ModelParams) -> tuple[VecField, Field]:
    """Advance the velocity by dt; returns (u_next, pressure).

    (1 + dt nu_bar |k|^2) u*_hat = u^n_hat + dt G_hat, u^{n+1} = P u*,
    p = rho_ref * (removed gradient potential) / dt, mean zero.
    """
    grid = state.grid
    dt = opts.dt
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > advective_dt_limit(state.u, grid):
        raise CflViolation(
            f"dt={dt:.3e} exceeds the advective limit "
            f"{advective_dt_limit(state.u, grid):.3e}"
        )
    nu_bar = opts.nu_bar(params)
    rho_ref = params.rho_ref()
    helm = 1.0 + dt * nu_bar * grid.k2

    g = momentum_rhs_explicit(state, mu, opts, params)
    u_next, p = _project(state.u, g, dt, helm, rho_ref, grid)

    for _ in range(max(0, opts.pressure_iterations)):
        # lagged variable-density correction: -(1/rho - 1/rho_ref) grad p
        rho = rho_of_phi(state.phi, params)
        coef = 1.0 / rho.values - 1.0 / rho_ref
        gp = gradient(p)
        rule = opts.dealias_rule
        corr_x = dealias(Field.from_values(grid, -coef * gp.x.values), rule)
        corr_y = dealias(Field.from_values(grid, -coef * gp.y.values), rule)
        g_corr = VecField(
            Field.from_coeffs(grid, g.x.coeffs + corr_x.coeffs),
            Field.from_coeffs(grid, g.y.coeffs + corr_y.coeffs),
        )
        u_next, p = _project(state.u, g_corr, dt, helm, rho_ref, grid)
    return u_next, p


def _project(u_n: VecField, g: VecField, dt, helm, rho_ref, grid):
    star_x = (u_n.x.coeffs + dt * g.x.coeffs) / helm
    star_y = (u_n.y.coeffs + dt * g.y.coeffs) / helm
    star = VecField(Field.from_coeffs(grid, star_x), Field.from_coeffs(grid, star_y))
    u_next = leray_project(star)
    # removed gradient = grad chi, chi_hat = -i (k . u*_hat)/|k|^2
    k2 = grid.k2
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    chi_hat = -1j * (grid.kx * star_x + grid.ky * star_y) * inv
    chi_hat[0, 0] = 0.0
    p = Field.from_coeffs(grid, (rho_ref / dt) * chi_hat)
    return u_next, p


def microrotation_step(state: State, u_next: VecField, mu: Field,
                       opts: FlowStepOptions, params: ModelParams) -> Field:
    """Advance omega by dt against the fresh velocity.

    Stage (i): (1 + dt c_bar |k|^2) omega*_hat = omega^n_hat + dt H_hat with
    H = -(u^{n+1}.grad)omega + (1/rho)[div((cd+ca) grad omega)
        + 2 eta_r curl(u^{n+1}) + rho' grad mu . grad omega] - c_bar*Lap(omega).
    Stage (ii): pointwise relaxation omega / (1 + 4 dt eta_r(phi)/rho(phi)).
    """
    grid = state.grid
    dt = opts.dt
    rule = opts.dealias_rule
    mask = grid.mask(rule)
    omega = state.omega
    phi = state.phi

    rho = rho_of_phi(phi, params)
    check_positive(rho, "density rho(phi)")
    c_sum = c_sum_of_phi(phi, params)
    check_positive(c_sum, "angular viscosity (cd+ca)(phi)")
    eta_r = eta_r_of_phi(phi, params)

    om_x, om_y = _grad_components(omega)

    adv = u_next.x.values * om_x + u_next.y.values * om_y

    fx = Field.from_coeffs(grid, np.fft.fft2(c_sum.values * om_x) * mask)
    fy = Field.from_coeffs(grid, np.fft.fft2(c_sum.values * om_y) * mask)
    diff_var = derivative(fx, 0).values + derivative(fy, 1).values

    curl_u = derivative(u_next.y, 0).values - derivative(u_next.x, 1).values
    coupling = 2.0 * eta_r.values * curl_u

    rp = params.rho_prime()
    mu_x, mu_y = _grad_components(mu)
    flux = rp * (mu_x * om_x + mu_y * om_y)

    c_bar = opts.c_bar(params)
    lap_om = Field.from_coeffs(grid, -grid.k2 * omega.coeffs).values

    h = -adv + (diff_var + coupling + flux) / rho.values - c_bar * lap_om
    h_hat = np.fft.fft2(h) * mask

    star_hat = (omega.coeffs + dt * h_hat) / (1.0 + dt * c_bar * grid.k2)
    star = Field.from_coeffs(grid, star_hat)

    relax = 1.0 + 4.0 * dt * eta_r.values / rho.values
    return Field.from_values(grid, star.values / relax)
