"""Convective Cahn-Hilliard sub-stepper and initial-data mollification.

The transport step is linearly implicit: the fourth-order interface term
and a linear stabilization are treated implicitly (one diagonal spectral
solve), the advection and the potential nonlinearity explicitly.  The
zero mode of the update is exactly the zero mode of the input, so the
mean of phi is conserved to the bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import CflViolation, NonConvergence
from .model import (
    ModelParams,
    chemical_potential,
    potential_deriv,
    potential_second,
)
from .spectral import TWO_THIRDS, Field, VecField, check_same_grid, derivative

ADVECTIVE_FLOOR = 1e-8


@dataclass(frozen=True)
class ChStepOptions:
    """Knobs of the transport step: dt, viscous-CH constant alpha,
    stabilization S and the dealiasing rule."""

    dt: float
    alpha: float = 0.0
    stabilization: float = 0.0
    dealias_rule: str = TWO_THIRDS

    @classmethod
    def from_params(cls, dt: float, params: ModelParams,
                    dealias_rule: str = TWO_THIRDS) -> "ChStepOptions":
        return cls(
            dt=dt,
            alpha=params.alpha,
            stabilization=params.stabilization_value(),
            dealias_rule=dealias_rule,
        )


def advective_dt_limit(u: VecField, grid) -> float:
    """h / max(|u|, floor): the dt above which the explicit advection is off-contract."""
    return grid.spacing / max(u.max_abs(), ADVECTIVE_FLOOR)


def advection_term(phi: Field, u: VecField, rule: str) -> Field:
    """dealias(u . grad phi) with the zero mode forced to zero exactly."""
    grid = check_same_grid(phi, u.x, u.y)
    dphi_x = derivative(phi, 0).values
    dphi_y = derivative(phi, 1).values
    adv = Field.from_values(grid, u.x.values * dphi_x + u.y.values * dphi_y)
    c = adv.coeffs * grid.mask(rule)
    c[0, 0] = 0.0
    return Field.from_coeffs(grid, c)


def ch_step(phi_n: Field, u_n: VecField, opts: ChStepOptions,
            params: ModelParams) -> tuple[Field, Field]:
    """One transport step of phi by dt; returns (phi_next, mu_next).

    (phi^{n+1} - phi^n)/dt + dealias(u^n . grad phi^n) = Lap(mu*)
    mu* = sigma*eps*(-Lap phi^{n+1}) + (sigma/eps) F'(phi^n)
          + S (phi^{n+1} - phi^n) + alpha (phi^{n+1} - phi^n)/dt

    mu_next is recomputed constitutively from phi^{n+1} so downstream steps
    (and restarts) see a pure function of the state.
    """
    grid = check_same_grid(phi_n, u_n.x, u_n.y)
    dt = opts.dt
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if dt > advective_dt_limit(u_n, grid):
        raise CflViolation(
            f"dt={dt:.3e} exceeds the advective limit "
            f"{advective_dt_limit(u_n, grid):.3e}"
        )
    rule = opts.dealias_rule
    s_eff = opts.stabilization + opts.alpha / dt

    adv = advection_term(phi_n, u_n, rule)
    fprime = Field.from_values(grid, potential_deriv(phi_n.values, params))
    fprime_hat = fprime.coeffs * grid.mask(rule)

    k2 = grid.k2
    sig_ratio = params.sigma / params.eps
    numer = (
        phi_n.coeffs * (1.0 + dt * k2 * s_eff)
        - dt * adv.coeffs
        - dt * k2 * sig_ratio * fprime_hat
    )
    denom = 1.0 + dt * k2 * s_eff + dt * params.sigma * params.eps * grid.k4
    phi_next = Field.from_coeffs(grid, numer / denom)
    # touch values once: trips SeparationViolation early for the log well
    if params.potential == "logarithmic":
        potential_deriv(phi_next.values, params)
    mu_next = chemical_potential(phi_next, params, rule)
    return phi_next, mu_next


def truncate_mu(mu0: Field, k_level: float) -> Field:
    """Pointwise clamp of the initial chemical potential to [-k, k]."""
    if not (k_level > 0):
        raise ValueError(f"truncation level must be positive, got {k_level}")
    return Field.from_values(mu0.grid, np.clip(mu0.values, -k_level, k_level))


@dataclass(frozen=True)
class MollifierReport:
    """Outcome of one mollification: truncation level, Newton iteration
    count, final residual, separation margin 1 - max|phi| and the drift of
    the mean away from the seed profile."""

    k_level: float
    iterations: int
    residual: float
    separation: float
    mean_drift: float


def _neg_laplacian(vals, grid):
    return np.fft.ifft2(grid.k2 * np.fft.fft2(vals)).real


def _mollifier_residual(phi_vals, g_vals, grid, params):
    return _neg_laplacian(phi_vals, grid) + potential_deriv(phi_vals, params) - g_vals


def mollify_initial_phi(phi0: Field, k_level: float, params: ModelParams,
                        max_iter: int = 200, tol: float = 1e-10
                        ) -> tuple[Field, MollifierReport]:
    """Replace phi0 by the solution of -Lap(phi) + F'(phi) = h_k(mu0)
    where mu0 = -Lap(phi0) + F'(phi0) and h_k clamps to [-k, k].

    Damped Newton with a matrix-free Jacobian -Lap + F''(phi) and a spectral
    (-Lap + c)^{-1} preconditioner; falls back to a preconditioned Picard
    sweep when a Newton direction stalls.  The mean of the result is free to
    drift and is reported, not constrained.
    """
    grid = phi0.grid
    mu0 = Field.from_values(
        grid, _neg_laplacian(phi0.values, grid) + potential_deriv(phi0.values, params)
    )
    g = truncate_mu(mu0, k_level).values

    n = grid.n
    phi = phi0.values.copy()
    log_well = params.potential == "logarithmic"

    def valid(candidate):
        return not log_well or np.max(np.abs(candidate)) < 1.0 - 1e-9

    res = _mollifier_residual(phi, g, grid, params)
    res_norm = float(np.max(np.abs(res)))
    iterations = 0
    for it in range(max_iter):
        if res_norm <= tol:
            break
        iterations = it + 1
        fpp = potential_second(phi, params)
        c = max(1.0, float(np.min(fpp)) + params.theta0)
        pre_denom = grid.k2 + c

        def jac_mv(v):
            v = v.reshape(n, n)
            out = np.fft.ifft2(grid.k2 * np.fft.fft2(v)).real + fpp * v
            return out.ravel()

        def pre_mv(v):
            v = v.reshape(n, n)
            return np.fft.ifft2(np.fft.fft2(v) / pre_denom).real.ravel()

        jac = LinearOperator((n * n, n * n), matvec=jac_mv, dtype=np.float64)
        pre = LinearOperator((n * n, n * n), matvec=pre_mv, dtype=np.float64)
        # The absolute floor keeps the linear test reachable near convergence,
        # where rtol * |residual| would sit below roundoff; the line search,
        # not the gmres exit flag, decides whether the direction is usable.
        delta, _ = gmres(jac, -res.ravel(), M=pre, rtol=1e-10,
                         atol=0.01 * tol, maxiter=200)
        delta = delta.reshape(n, n)

        step = 1.0
        improved = False
        if np.all(np.isfinite(delta)):
            while step >= 1e-4:
                cand = phi + step * delta
                if valid(cand):
                    cand_res = _mollifier_residual(cand, g, grid, params)
                    cand_norm = float(np.max(np.abs(cand_res)))
                    if cand_norm < res_norm:
                        phi, res, res_norm = cand, cand_res, cand_norm
                        improved = True
                        break
                step *= 0.5
        if not improved:
            # Picard sweep: phi <- (-Lap + c)^{-1} (g - F'(phi) + c phi)
            rhs = g - potential_deriv(phi, params) + c * phi
            cand = np.fft.ifft2(np.fft.fft2(rhs) / pre_denom).real
            if not valid(cand):
                cand = phi + 0.1 * (cand - phi)
            cand_res = _mollifier_residual(cand, g, grid, params)
            cand_norm = float(np.max(np.abs(cand_res)))
            if cand_norm >= res_norm:
                raise NonConvergence(
                    f"mollifier stalled at residual {res_norm:.3e} "
                    f"(target {tol:.1e}) after {iterations} iterations"
                )
            phi, res, res_norm = cand, cand_res, cand_norm

    if res_norm > tol:
        raise NonConvergence(
            f"mollifier residual {res_norm:.3e} above target {tol:.1e} "
            f"after {max_iter} iterations"
        )
    out = Field.from_values(grid, phi)
    report = MollifierReport(
        k_level=float(k_level),
        iterations=iterations,
        residual=res_norm,
        separation=1.0 - out.max_abs(),
        mean_drift=abs(out.mean() - phi0.mean()),
    )
    return out, report
