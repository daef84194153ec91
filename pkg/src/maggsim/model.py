"""Constitutive laws, potentials and the energy/dissipation bookkeeping.

The mixture carries a phase field phi in [-1, 1] (pure phases at the
endpoints).  Density and every viscosity coefficient interpolate affinely
between the two pure-phase values; nothing is clamped outside [-1, 1],
positivity is monitored instead.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PositivityLoss, SeparationViolation
from .spectral import (
    Field,
    VecField,
    check_same_grid,
    dealias,
    derivative,
    gradient,
    integrate,
    laplacian,
)

QUARTIC = "quartic"
LOGARITHMIC = "logarithmic"

MAGG = "magg"
AGG = "agg"
MODELH = "modelh"

SEPARATION_FLOOR = 1e-9


def _pair(name, value):
    try:
        a, b = (float(value[0]), float(value[1]))
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"{name} must be a pair of numbers, got {value!r}")
    return (a, b)


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the two-phase micropolar mixture.

    Pairs hold (phase 1, phase 2) values, interpolated affinely in phi.
    variant selects the full model ("magg"), the nonpolar limit ("agg",
    rotational viscosity forced to zero), or the matched-density limit
    ("modelh", constant density rho_bar and no rotational viscosity).
    """

    sigma: float = 1.0
    eps: float = 0.3
    rho: tuple = (3.0, 1.0)
    eta: tuple = (1.0, 0.5)
    eta_r: tuple = (0.5, 0.25)
    c0: tuple = (0.2, 0.2)
    cd: tuple = (0.5, 0.4)
    ca: tuple = (0.3, 0.2)
    theta: float = 1.0
    theta0: float = 2.0
    potential: str = QUARTIC
    alpha: float = 0.0
    variant: str = MAGG
    rho_bar: float = 0.0
    stabilization: float | None = None  # None means "use the default formula"

    def validate(self) -> "ModelParams":
        if self.sigma <= 0 or self.eps <= 0:
            raise ConfigError("sigma and eps must be positive")
        for name in ("rho", "eta", "eta_r", "c0", "cd", "ca"):
            a, b = _pair(name, getattr(self, name))
            if name == "eta_r":
                if a < 0 or b < 0:
                    raise ConfigError(f"eta_r values must be >= 0, got {a}, {b}")
            elif a <= 0 or b <= 0:
                raise ConfigError(f"{name} values must be positive, got {a}, {b}")
        if self.potential not in (QUARTIC, LOGARITHMIC):
            raise ConfigError(f"unknown potential {self.potential!r}")
        if self.potential == LOGARITHMIC and not (0 < self.theta < self.theta0):
            raise ConfigError(
                f"logarithmic potential requires 0 < theta < theta0, "
                f"got theta={self.theta}, theta0={self.theta0}"
            )
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.variant not in (MAGG, AGG, MODELH):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == MODELH and not (self.rho_bar > 0):
            raise ConfigError("modelh variant needs a positive rho_bar")
        if self.stabilization is not None and self.stabilization < 0:
            raise ConfigError(f"stabilization must be >= 0, got {self.stabilization}")
        for i in range(2):
            if self.cd[i] < self.ca[i] or 2 * self.c0[i] + self.ca[i] <= self.cd[i]:
                warnings.warn(
                    "angular viscosities outside the technical range "
                    "(cd >= ca and 2 c0 + ca > cd); proceeding anyway",
                    stacklevel=2,
                )
        return self

    # effective coefficient pairs after the variant is applied

    def rho_pair(self):
        if self.variant == MODELH:
            return (self.rho_bar, self.rho_bar)
        return self.rho

    def rho_prime(self) -> float:
        r1, r2 = self.rho_pair()
        return 0.5 * (r1 - r2)

    def eta_r_pair(self):
        if self.variant == MAGG:
            return self.eta_r
        return (0.0, 0.0)

    def c_sum_pair(self):
        return (self.cd[0] + self.ca[0], self.cd[1] + self.ca[1])

    def rho_ref(self) -> float:
        if self.variant == MODELH:
            return self.rho_bar
        return 0.5 * (self.rho[0] + self.rho[1])

    def stabilization_value(self) -> float:
        if self.stabilization is not None:
            return self.stabilization
        return (self.sigma / self.eps) * max(1.0, self.theta0)


def coeff_of_phi(pair, phi: Field) -> Field:
    """Affine interpolation c(phi) = (c1-c2)/2 * phi + (c1+c2)/2."""
    c1, c2 = pair
    slope = 0.5 * (c1 - c2)
    mid = 0.5 * (c1 + c2)
    return Field.from_values(phi.grid, slope * phi.values + mid)


def rho_of_phi(phi: Field, params: ModelParams) -> Field:
    return coeff_of_phi(params.rho_pair(), phi)


def eta_of_phi(phi: Field, params: ModelParams) -> Field:
    return coeff_of_phi(params.eta, phi)


def eta_r_of_phi(phi: Field, params: ModelParams) -> Field:
    return coeff_of_phi(params.eta_r_pair(), phi)


def c_sum_of_phi(phi: Field, params: ModelParams) -> Field:
    return coeff_of_phi(params.c_sum_pair(), phi)


def check_positive(coeff: Field, what: str):
    lo = float(np.min(coeff.values))
    if lo <= 0:
        raise PositivityLoss(f"{what} reached {lo:.6g}; must stay positive")


def _check_separation(s: np.ndarray, floor: float):
    amax = float(np.max(np.abs(s)))
    if amax >= 1.0 - floor:
        flat = int(np.argmax(np.abs(s)))
        loc = np.unravel_index(flat, s.shape) if s.ndim else None
        raise SeparationViolation(amax, loc)


def potential_value(s, params: ModelParams):
    """Double-well free energy density F(s)."""
    s = np.asarray(s, dtype=np.float64)
    if params.potential == QUARTIC:
        return 0.25 * (s**2 - 1.0) ** 2
    _check_separation(s, SEPARATION_FLOOR)
    th, th0 = params.theta, params.theta0
    return 0.5 * th * ((1.0 + s) * np.log1p(s) + (1.0 - s) * np.log1p(-s)) - 0.5 * th0 * s**2


def potential_deriv(s, params: ModelParams):
    """F'(s); raises SeparationViolation near the logarithmic endpoints."""
    s = np.asarray(s, dtype=np.float64)
    if params.potential == QUARTIC:
        return s**3 - s
    _check_separation(s, SEPARATION_FLOOR)
    return 0.5 * params.theta * (np.log1p(s) - np.log1p(-s)) - params.theta0 * s


def potential_second(s, params: ModelParams):
    """F''(s), bounded below by -theta0 for the logarithmic well."""
    s = np.asarray(s, dtype=np.float64)
    if params.potential == QUARTIC:
        return 3.0 * s**2 - 1.0
    _check_separation(s, SEPARATION_FLOOR)
    return params.theta / (1.0 - s**2) - params.theta0


def chemical_potential(phi: Field, params: ModelParams, rule: str = "two_thirds") -> Field:
    """mu = -sigma*eps*Lap(phi) + (sigma/eps)*F'(phi), nonlinearity dealiased."""
    grid = phi.grid
    fprime = dealias(Field.from_values(grid, potential_deriv(phi.values, params)), rule)
    lap = laplacian(phi)
    return Field.from_coeffs(
        grid, -params.sigma * params.eps * lap.coeffs + (params.sigma / params.eps) * fprime.coeffs
    )


def capillary_force(phi: Field, mu: Field, rule: str = "two_thirds") -> VecField:
    """Capillary forcing mu * grad(phi); the gradient remainder of the
    stress-divergence form is absorbed into the pressure."""
    check_same_grid(phi, mu)
    gphi = gradient(phi)
    mu_v = mu.values
    fx = dealias(Field.from_values(phi.grid, mu_v * gphi.x.values), rule)
    fy = dealias(Field.from_values(phi.grid, mu_v * gphi.y.values), rule)
    return VecField(fx, fy)


@dataclass(frozen=True)
class State:
    """One time level of the coupled system: (u, omega, phi) plus cached
    mu and p derived from them."""

    time: float
    u: VecField
    omega: Field
    phi: Field
    mu: Field
    p: Field

    @property
    def grid(self):
        return self.phi.grid


def make_state(u: VecField, omega: Field, phi: Field, params: ModelParams,
               time: float = 0.0, p: Field | None = None) -> State:
    grid = check_same_grid(u.x, u.y, omega, phi)
    mu = chemical_potential(phi, params)
    if p is None:
        p = Field.zeros(grid)
    return State(time=time, u=u, omega=omega, phi=phi, mu=mu, p=p)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Pieces of the total energy: translational and angular kinetic parts,
    interface gradient part and the bulk potential part."""

    kinetic_u: float
    kinetic_omega: float
    gradient: float
    potential: float

    @property
    def total(self) -> float:
        return self.kinetic_u + self.kinetic_omega + self.gradient + self.potential


@dataclass(frozen=True)
class DissipationBreakdown:
    """Pieces of the instantaneous dissipation rate."""

    mu_grad: float
    viscous_sym: float
    rotational_coupling: float
    omega_diffusion: float

    @property
    def total(self) -> float:
        return (
            self.mu_grad
            + self.viscous_sym
            + self.rotational_coupling
            + self.omega_diffusion
        )


def total_energy(state: State, params: ModelParams) -> EnergyBreakdown:
    """E = int rho/2 |u|^2 + rho/2 omega^2 + sigma*eps/2 |grad phi|^2 + (sigma/eps) F(phi)."""
    grid = state.grid
    rho = rho_of_phi(state.phi, params).values
    u2 = state.u.x.values**2 + state.u.y.values**2
    gphi = gradient(state.phi)
    grad2 = gphi.x.values**2 + gphi.y.values**2
    return EnergyBreakdown(
        kinetic_u=integrate(0.5 * rho * u2, grid),
        kinetic_omega=integrate(0.5 * rho * state.omega.values**2, grid),
        gradient=integrate(0.5 * params.sigma * params.eps * grad2, grid),
        potential=integrate(
            (params.sigma / params.eps) * potential_value(state.phi.values, params), grid
        ),
    )


def dissipation(state: State, params: ModelParams) -> DissipationBreakdown:
    """D = int |grad mu|^2 + 2 eta |Du|^2 + 4 eta_r |curl u / 2 - omega|^2
    + (cd+ca) |grad omega|^2 (the 2D collapse of the angular terms)."""
    grid = state.grid
    gmu = gradient(state.mu)
    mu_grad = integrate(gmu.x.values**2 + gmu.y.values**2, grid)

    ux_x = derivative(state.u.x, 0).values
    ux_y = derivative(state.u.x, 1).values
    uy_x = derivative(state.u.y, 0).values
    uy_y = derivative(state.u.y, 1).values
    d12 = 0.5 * (ux_y + uy_x)
    du_sq = ux_x**2 + 2.0 * d12**2 + uy_y**2
    eta = eta_of_phi(state.phi, params).values
    viscous = integrate(2.0 * eta * du_sq, grid)

    curl_u = uy_x - ux_y
    eta_r = eta_r_of_phi(state.phi, params).values
    rot = integrate(4.0 * eta_r * (0.5 * curl_u - state.omega.values) ** 2, grid)

    gom = gradient(state.omega)
    c_sum = c_sum_of_phi(state.phi, params).values
    om_diff = integrate(c_sum * (gom.x.values**2 + gom.y.values**2), grid)

    return DissipationBreakdown(
        mu_grad=mu_grad,
        viscous_sym=viscous,
        rotational_coupling=rot,
        omega_diffusion=om_diff,
    )
