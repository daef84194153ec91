"""Spectral calculus on the periodic square torus.

Fields live on a uniform n x n grid over [0, L)^2 and carry paired
representations: point values and unnormalized FFT coefficients (numpy
convention, f_hat = fft2(f)).  All operators are diagonal in Fourier
space; products are formed pointwise and dealiased by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatch, MeanModeError

TWO_THIRDS = "two_thirds"
HALF = "half"


@dataclass(frozen=True)
class SpectralGrid:
    """Wavenumber tables, dealiasing masks and quadrature weights for one grid."""

    n: int
    box_length: float
    x: np.ndarray = field(init=False, repr=False, compare=False)
    y: np.ndarray = field(init=False, repr=False, compare=False)
    kx: np.ndarray = field(init=False, repr=False, compare=False)
    ky: np.ndarray = field(init=False, repr=False, compare=False)
    k2: np.ndarray = field(init=False, repr=False, compare=False)
    k4: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_two_thirds: np.ndarray = field(init=False, repr=False, compare=False)
    dealias_half: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"grid size must be even and >= 8, got n={self.n}")
        if not (self.box_length > 0):
            raise ValueError(f"box length must be positive, got {self.box_length}")
        n, length = self.n, self.box_length
        h = length / n
        coords = h * np.arange(n)
        xg, yg = np.meshgrid(coords, coords, indexing="ij")
        # integer mode numbers in transform order: 0..n/2-1, -n/2..-1
        modes = np.fft.fftfreq(n, d=1.0 / n).astype(np.int64)
        scale = 2.0 * np.pi / length
        kx = scale * modes[:, None] * np.ones((1, n))
        ky = scale * np.ones((n, 1)) * modes[None, :]
        k2 = kx**2 + ky**2
        # masks compare integer modes (3|m| <= n, 4|m| <= n) to dodge float fuzz
        abs_m = np.abs(modes)
        keep23 = 3 * abs_m <= n
        keep12 = 4 * abs_m <= n
        object.__setattr__(self, "x", xg)
        object.__setattr__(self, "y", yg)
        object.__setattr__(self, "kx", kx)
        object.__setattr__(self, "ky", ky)
        object.__setattr__(self, "k2", k2)
        object.__setattr__(self, "k4", k2**2)
        object.__setattr__(self, "dealias_two_thirds", keep23[:, None] & keep23[None, :])
        object.__setattr__(self, "dealias_half", keep12[:, None] & keep12[None, :])

    @property
    def spacing(self) -> float:
        return self.box_length / self.n

    @property
    def k_max(self) -> float:
        """Largest resolved wavenumber magnitude per axis, (2*pi/L)*(n/2)."""
        return 2.0 * np.pi / self.box_length * (self.n // 2)

    @property
    def quad_weight(self) -> float:
        """Weight of one grid point in the trapezoidal quadrature, (L/n)^2."""
        return (self.box_length / self.n) ** 2

    @property
    def spec_weight(self) -> float:
        """Plancherel weight: integral of |f|^2 equals spec_weight * sum |f_hat|^2."""
        return self.box_length**2 / self.n**4

    def mask(self, rule: str) -> np.ndarray:
        if rule == TWO_THIRDS:
            return self.dealias_two_thirds
        if rule == HALF:
            return self.dealias_half
        raise ValueError(f"unknown dealias rule {rule!r}")


def make_grid(n: int, box_length: float) -> SpectralGrid:
    """Build the wavenumber tables and masks for an n x n torus of side box_length."""
    return SpectralGrid(n=n, box_length=float(box_length))


class Field:
    """Immutable real scalar field with lazily synced value/coefficient views."""

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: SpectralGrid, values=None, coeffs=None):
        if values is None and coeffs is None:
            raise ValueError("field needs values or coefficients")
        self.grid = grid
        self._values = values
        self._coeffs = coeffs

    @classmethod
    def from_values(cls, grid: SpectralGrid, values) -> "Field":
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {arr.shape}")
        return cls(grid, values=arr)

    @classmethod
    def from_coeffs(cls, grid: SpectralGrid, coeffs) -> "Field":
        arr = np.asarray(coeffs, dtype=np.complex128)
        if arr.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {arr.shape}")
        return cls(grid, coeffs=arr)

    @classmethod
    def zeros(cls, grid: SpectralGrid) -> "Field":
        return cls(grid, values=np.zeros((grid.n, grid.n)))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = np.fft.ifft2(self._coeffs).real
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = np.fft.fft2(self._values)
        return self._coeffs

    def mean(self) -> float:
        if self._coeffs is not None:
            return float(self._coeffs[0, 0].real) / self.grid.n**2
        return float(np.mean(self._values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class VecField:
    """Velocity-like pair of scalar fields on a common grid."""

    x: Field
    y: Field

    @property
    def grid(self) -> SpectralGrid:
        return self.x.grid

    def max_abs(self) -> float:
        return float(np.max(np.hypot(self.x.values, self.y.values)))


def zero_vec(grid: SpectralGrid) -> VecField:
    return VecField(Field.zeros(grid), Field.zeros(grid))


def check_same_grid(*objs) -> SpectralGrid:
    grid = objs[0].grid
    for other in objs[1:]:
        og = other.grid
        if og.n != grid.n or og.box_length != grid.box_length:
            raise GridMismatch(
                f"mixed grids: {grid.n}x{grid.n} (L={grid.box_length}) vs "
                f"{og.n}x{og.n} (L={og.box_length})"
            )
    return grid


def _require_finite(arr, what: str):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite values in {what}")


def derivative(f: Field, axis: int) -> Field:
    """Spectral partial derivative along axis 0 (x) or 1 (y).

    The unpaired Nyquist line of the differentiated axis is zeroed so the
    multiplier i*k keeps the coefficients conjugate-symmetric.
    """
    if axis not in (0, 1):
        raise ValueError(f"axis must be 0 or 1, got {axis}")
    grid = f.grid
    c = f.coeffs
    _require_finite(c, "field passed to derivative")
    k = grid.kx if axis == 0 else grid.ky
    out = 1j * k * c
    half = grid.n // 2
    if axis == 0:
        out[half, :] = 0.0
    else:
        out[:, half] = 0.0
    return Field.from_coeffs(grid, out)


def gradient(f: Field) -> VecField:
    return VecField(derivative(f, 0), derivative(f, 1))


def laplacian(f: Field) -> Field:
    return Field.from_coeffs(f.grid, -f.grid.k2 * f.coeffs)


def divergence(v: VecField) -> Field:
    return Field.from_coeffs(
        v.grid, derivative(v.x, 0).coeffs + derivative(v.y, 1).coeffs
    )


def curl_scalar(v: VecField) -> Field:
    """2D curl of a vector field: d1 v2 - d2 v1."""
    return Field.from_coeffs(
        v.grid, derivative(v.y, 0).coeffs - derivative(v.x, 1).coeffs
    )


def curl_vector(w: Field) -> VecField:
    """2D curl of a scalar: (d2 w, -d1 w)."""
    dw_dx = derivative(w, 0)
    dw_dy = derivative(w, 1)
    return VecField(dw_dy, Field.from_coeffs(w.grid, -dw_dx.coeffs))


def dealias(f: Field, rule: str = TWO_THIRDS) -> Field:
    """Zero all coefficients outside the chosen dealiasing mask."""
    grid = f.grid
    return Field.from_coeffs(grid, f.coeffs * grid.mask(rule))


def dealias_product(a: Field, b: Field, rule: str = TWO_THIRDS) -> Field:
    """Pointwise product of two fields, dealiased."""
    grid = check_same_grid(a, b)
    return dealias(Field.from_values(grid, a.values * b.values), rule)


def inverse_helmholtz(f: Field, a: float, b: float, p: int = 1) -> Field:
    """Solve (a + b*(-Laplacian)^p) g = f mode by mode.

    With a = 0 the zero mode is only solvable for mean-free f; a nonzero
    mean raises MeanModeError and a mean-free f gets a mean-zero g.
    """
    if p not in (1, 2):
        raise ValueError(f"helmholtz power must be 1 or 2, got {p}")
    if b < 0 or a < 0 or (a == 0 and b == 0):
        raise ValueError(f"need a, b >= 0 and not both zero, got a={a}, b={b}")
    grid = f.grid
    c = f.coeffs
    kp = grid.k2 if p == 1 else grid.k4
    denom = a + b * kp
    if a == 0:
        mean = abs(c[0, 0]) / grid.n**2
        scale = float(np.max(np.abs(c))) / grid.n**2
        if mean > 1e-12 * max(scale, 1e-300):
            raise MeanModeError(
                f"singular solve: a = 0 but right-hand side has mean {mean:.3e}"
            )
        denom = denom.copy()
        denom[0, 0] = 1.0
        out = c / denom
        out[0, 0] = 0.0
    else:
        out = c / denom
    return Field.from_coeffs(grid, out)


def leray_project(v: VecField) -> VecField:
    """Remove the gradient part: P = I - k k^T / |k|^2, zero mode passed through.

    The unpaired Nyquist lines count as wavenumber zero, matching the
    convention of `derivative`, so the projection annihilates the discrete
    divergence for any input, Nyquist content included.
    """
    grid = v.grid
    half = grid.n // 2
    kx = grid.kx.copy()
    ky = grid.ky.copy()
    kx[half, :] = 0.0
    ky[:, half] = 0.0
    k2 = kx**2 + ky**2
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    cx, cy = v.x.coeffs, v.y.coeffs
    dot = (kx * cx + ky * cy) * inv
    return VecField(
        Field.from_coeffs(grid, cx - kx * dot),
        Field.from_coeffs(grid, cy - ky * dot),
    )


def sobolev_norm_sq(f: Field, order: int = 0) -> float:
    """Squared Sobolev norm sum (1+|k|^2)^order |f_hat|^2, Plancherel-normalized.

    Order 0 equals the quadrature of |f|^2 over the torus.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"sobolev order must be 0, 1 or 2, got {order}")
    grid = f.grid
    mag = np.abs(f.coeffs) ** 2
    if order == 0:
        weight = 1.0
    elif order == 1:
        weight = 1.0 + grid.k2
    else:
        weight = (1.0 + grid.k2) ** 2
    return float(grid.spec_weight * np.sum(weight * mag))


def l2_norm_sq(f: Field) -> float:
    return sobolev_norm_sq(f, 0)


def integrate(values: np.ndarray, grid: SpectralGrid) -> float:
    """Trapezoidal quadrature of a gridded integrand over the torus."""
    return float(grid.quad_weight * np.sum(values))


def restrict_coeffs(f: Field, coarse: SpectralGrid) -> Field:
    """Project a field onto the resolved modes of a coarser grid.

    Coefficients are matched in the normalized (f_hat / n^2) convention; the
    coarse Nyquist lines are dropped since the fine grid splits them in two.
    """
    fine = f.grid
    if coarse.n > fine.n:
        raise GridMismatch(f"restriction target n={coarse.n} exceeds source n={fine.n}")
    if coarse.box_length != fine.box_length:
        raise GridMismatch("restriction requires matching box lengths")
    if coarse.n == fine.n:
        return f
    nc, nf = coarse.n, fine.n
    half = nc // 2
    src = f.coeffs / nf**2
    out = np.zeros((nc, nc), dtype=np.complex128)
    # shared integer modes -half+1 .. half-1; a mode m < 0 sits at index n+m
    modes = np.r_[0:half, -half + 1 : 0]
    rows_f = modes % nf
    rows_c = modes % nc
    out[np.ix_(rows_c, rows_c)] = src[np.ix_(rows_f, rows_f)]
    return Field.from_coeffs(coarse, out * nc**2)
