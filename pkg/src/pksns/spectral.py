"""
Spectral core: grids, transforms, dealiasing and the sheared derivative symbols.

Fields live on the periodic box [0, 2*pi) x [-Ly/2, Ly/2) and are stored as
the full complex FFT of the real physical array, normalised so that

    coeffs = fft2(f) / (Nx * Ny),   f = Re ifft2(coeffs) * (Nx * Ny).

With this convention the (0, 0) coefficient is the mean, so the integral of a
field over the box is ``coeffs[0, 0] * 2*pi * Ly`` and Parseval reads

    int |f|^2 dV = 2*pi * Ly * sum |coeffs|^2.

In the sheared frame z = x - t*y the y-derivative becomes d_y - t*d_z, with
symbol i*(eta - k*t).  All derivative symbols vanish on the Nyquist row and
column so that every operator maps real fields to real fields.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.fft as sfft

__all__ = [
    "FrameError",
    "Grid",
    "SpectralField",
    "make_grid",
    "forward",
    "inverse",
    "laplacian_L_symbol",
    "gradient_L",
    "gradient",
    "dealias",
    "zero_mode_split",
    "y_profile",
    "pseudo_product",
    "l2_norm",
    "hs_norm",
]

FRAMES = ("sheared", "lab")


class FrameError(ValueError):
    """Raised when fields from incompatible frames or times are combined."""


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform periodic grid on [0, 2*pi) x [-Ly/2, Ly/2)."""

    Nx: int
    Ny: int
    Ly: float
    Lx: float = 2 * np.pi

    @cached_property
    def kz(self) -> np.ndarray:
        """Integer wavenumbers in z, FFT ordering."""
        return np.fft.fftfreq(self.Nx, d=1.0 / self.Nx)

    @cached_property
    def ky(self) -> np.ndarray:
        """Scaled wavenumbers eta = (2*pi/Ly) * j in y, FFT ordering."""
        return np.fft.fftfreq(self.Ny, d=1.0 / self.Ny) * (2 * np.pi / self.Ly)

    @cached_property
    def j_index(self) -> np.ndarray:
        return np.fft.fftfreq(self.Ny, d=1.0 / self.Ny)

    @cached_property
    def K(self) -> np.ndarray:
        return np.broadcast_to(self.kz[:, None], (self.Nx, self.Ny))

    @cached_property
    def ETA(self) -> np.ndarray:
        return np.broadcast_to(self.ky[None, :], (self.Nx, self.Ny))

    @cached_property
    def z(self) -> np.ndarray:
        return np.arange(self.Nx) * (self.Lx / self.Nx)

    @cached_property
    def y(self) -> np.ndarray:
        return -self.Ly / 2 + np.arange(self.Ny) * (self.Ly / self.Ny)

    @cached_property
    def Z(self) -> np.ndarray:
        return np.broadcast_to(self.z[:, None], (self.Nx, self.Ny))

    @cached_property
    def Y(self) -> np.ndarray:
        return np.broadcast_to(self.y[None, :], (self.Nx, self.Ny))

    @property
    def dz(self) -> float:
        return self.Lx / self.Nx

    @property
    def dy(self) -> float:
        return self.Ly / self.Ny

    @property
    def area(self) -> float:
        return self.Lx * self.Ly

    @property
    def cell_area(self) -> float:
        return self.dz * self.dy

    @property
    def k_retained(self) -> int:
        """Largest |k| kept by the 2/3 rule."""
        return self.Nx // 3

    @property
    def j_retained(self) -> int:
        return self.Ny // 3

    @property
    def eta_retained(self) -> float:
        return self.j_retained * 2 * np.pi / self.Ly

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        keep_k = np.abs(self.kz) <= self.k_retained
        keep_j = np.abs(self.j_index) <= self.j_retained
        return keep_k[:, None] & keep_j[None, :]

    @cached_property
    def derivative_mask(self) -> np.ndarray:
        """False on the Nyquist row/column, where odd symbols break realness."""
        ok_k = self.kz != -(self.Nx // 2)
        ok_j = self.j_index != -(self.Ny // 2)
        return ok_k[:, None] & ok_j[None, :]

    def shear_eta(self, t: float) -> np.ndarray:
        """eta - k*t on the grid, the y-wavenumber seen in the lab frame."""
        return self.ETA - self.K * t

    def to_dict(self) -> dict:
        return {"Nx": self.Nx, "Ny": self.Ny, "Ly": float(self.Ly), "Lx": float(self.Lx)}

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (self.Nx, self.Ny, self.Ly, self.Lx) == (other.Nx, other.Ny, other.Ly, other.Lx)

    def __hash__(self):
        return hash((self.Nx, self.Ny, self.Ly, self.Lx))


def make_grid(Nx: int, Ny: int, Ly: float = 16 * np.pi) -> Grid:
    """Build a grid; sizes must be even and at least 16, and Ly >= 4*pi."""
    for name, n in (("Nx", Nx), ("Ny", Ny)):
        if int(n) != n:
            raise ValueError(f"{name} must be an integer, got {n!r}")
        if n < 16 or n % 2:
            raise ValueError(f"{name} must be even and >= 16, got {n}")
    if not Ly > 0:
        raise ValueError(f"Ly must be positive, got {Ly}")
    if Ly < 4 * np.pi * (1 - 1e-12):
        raise ValueError(f"Ly must be >= 4*pi, got {Ly}")
    return Grid(int(Nx), int(Ny), float(Ly))


def forward(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Full complex coefficient array of a real field (exactly Hermitian)."""
    nx, ny = grid.Nx, grid.Ny
    half = sfft.rfft2(np.asarray(f, dtype=float)) / (nx * ny)
    out = np.empty((nx, ny), complex)
    h = ny // 2 + 1
    out[:, :h] = half
    # c(-k, -j) = conj c(k, j) fills the columns j > Ny/2
    out[:, h:] = np.conj(half[(-np.arange(nx)) % nx, 1 : ny - h + 1][:, ::-1])
    return out


def inverse(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Real field from coefficients; only the Hermitian part of ``coeffs`` is used."""
    nx, ny = grid.Nx, grid.Ny
    return sfft.irfft2(coeffs[:, : ny // 2 + 1], s=(nx, ny)) * (nx * ny)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Fourier coefficients of a real field, tagged with frame and time."""

    grid: Grid
    coeffs: np.ndarray
    frame: str = "sheared"
    time: float = 0.0

    def __post_init__(self):
        if self.frame not in FRAMES:
            raise FrameError(f"unknown frame {self.frame!r}")
        if self.coeffs.shape != (self.grid.Nx, self.grid.Ny):
            raise ValueError(
                f"coeffs shape {self.coeffs.shape} does not match grid "
                f"({self.grid.Nx}, {self.grid.Ny})"
            )

    @classmethod
    def from_physical(cls, grid: Grid, values, frame="sheared", time=0.0) -> "SpectralField":
        return cls(grid, forward(grid, values), frame, float(time))

    @classmethod
    def zeros(cls, grid: Grid, frame="sheared", time=0.0) -> "SpectralField":
        return cls(grid, np.zeros((grid.Nx, grid.Ny), complex), frame, float(time))

    def physical(self) -> np.ndarray:
        return inverse(self.grid, self.coeffs)

    def with_coeffs(self, coeffs: np.ndarray, time: float | None = None) -> "SpectralField":
        return replace(self, coeffs=coeffs, time=self.time if time is None else float(time))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _check_compatible(self, other)
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return self.with_coeffs(self.coeffs * scalar)

    __rmul__ = __mul__


def _check_compatible(*fields: SpectralField, time: float | None = None) -> None:
    first = fields[0]
    for f in fields[1:]:
        if f.grid != first.grid:
            raise FrameError("fields live on different grids")
        if f.frame != first.frame:
            raise FrameError(f"frame mismatch: {first.frame} vs {f.frame}")
    if time is not None:
        for f in fields:
            if not np.isclose(f.time, time, rtol=0, atol=1e-12):
                raise FrameError(f"field evaluated at t={f.time}, expected t={time}")


def laplacian_L_symbol(k, eta, t):
    """Symbol of the sheared Laplacian, -(k^2 + (eta - k t)^2)."""
    k = np.asarray(k, dtype=float)
    return -(k**2 + (eta - k * t) ** 2)


def _gradient_symbols(grid: Grid, t: float):
    mask = grid.derivative_mask
    return 1j * grid.K * mask, 1j * grid.shear_eta(t) * mask


def gradient_L(f: SpectralField, t: float) -> tuple[SpectralField, SpectralField]:
    """(d_z f, (d_y - t d_z) f) for a sheared-frame field."""
    if f.frame != "sheared":
        raise FrameError("gradient_L expects a sheared-frame field; use gradient() in the lab frame")
    dz, dyt = _gradient_symbols(f.grid, t)
    return f.with_coeffs(dz * f.coeffs, t), f.with_coeffs(dyt * f.coeffs, t)


def gradient(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Plain (d_z, d_y) gradient for lab-frame fields."""
    if f.frame != "lab":
        raise FrameError("gradient expects a lab-frame field; use gradient_L for sheared fields")
    dz, dy = _gradient_symbols(f.grid, 0.0)
    return f.with_coeffs(dz * f.coeffs), f.with_coeffs(dy * f.coeffs)


def dealias(f: SpectralField) -> SpectralField:
    """Zero every mode outside the 2/3-rule shell."""
    return f.with_coeffs(f.coeffs * f.grid.dealias_mask)


def zero_mode_split(f: SpectralField) -> tuple[SpectralField, SpectralField]:
    """Split into the z-average (the k = 0 row) and the remainder.

    The z-average is returned as a field supported on k = 0; its physical
    values do not depend on z.  ``y_profile`` extracts the 1-D profile.
    """
    c0 = np.zeros_like(f.coeffs)
    c0[0] = f.coeffs[0]
    return f.with_coeffs(c0), f.with_coeffs(f.coeffs - c0)


def y_profile(f: SpectralField) -> np.ndarray:
    """The z-average of ``f`` as a function of y on the grid points."""
    g = f.grid
    return sfft.ifft(f.coeffs[0]).real * g.Ny


def pseudo_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Dealiased product of two fields computed on the physical grid."""
    _check_compatible(f, g)
    grid = f.grid
    prod = forward(grid, inverse(grid, f.coeffs) * inverse(grid, g.coeffs))
    return f.with_coeffs(prod * grid.dealias_mask)


def l2_norm(f: SpectralField) -> float:
    """L^2 norm over the box via Parseval."""
    return float(np.sqrt(f.grid.area * np.sum(np.abs(f.coeffs) ** 2)))


def hs_norm(f: SpectralField, s: float) -> float:
    """H^s norm with Bessel weights <k, eta>^s."""
    g = f.grid
    w = (1 + g.K**2 + g.ETA**2) ** s
    return float(np.sqrt(g.area * np.sum(w * np.abs(f.coeffs) ** 2)))
