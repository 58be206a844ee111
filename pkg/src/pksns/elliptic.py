"""Chemical and Biot-Savart solves in sheared coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import FrameError, Grid, SpectralField, _check_compatible, forward, inverse

__all__ = [
    "VelocityField",
    "chemical_symbol",
    "streamfunction_symbol",
    "solve_chemical",
    "biot_savart",
    "chemotaxis_flux",
    "divergence_L",
    "curl_L",
]


@dataclass(frozen=True)
class VelocityField:
    u1: SpectralField
    u2: SpectralField
    time: float

    @property
    def frame(self) -> str:
        return self.u1.frame


def chemical_symbol(grid: Grid, t: float) -> np.ndarray:
    """1 / (1 + k^2 + (eta - k t)^2), the symbol of (1 - Delta_L)^-1."""
    return 1.0 / (1.0 + grid.K**2 + grid.shear_eta(t) ** 2)


def streamfunction_symbol(grid: Grid, t: float) -> np.ndarray:
    """Symbol of Delta_L^-1 with the (0, 0) mode set to zero."""
    q2 = grid.K**2 + grid.shear_eta(t) ** 2
    out = np.zeros_like(q2)
    nz = q2 > 0
    out[nz] = -1.0 / q2[nz]
    return out


def _require_sheared(f: SpectralField, name: str):
    if f.frame != "sheared":
        raise FrameError(f"{name} must be a sheared-frame field")


def solve_chemical(N: SpectralField, t: float) -> SpectralField:
    """C = (1 - Delta_L)^-1 N."""
    _require_sheared(N, "N")
    return N.with_coeffs(N.coeffs * chemical_symbol(N.grid, t), t)


def biot_savart(omega: SpectralField, t: float) -> VelocityField:
    """U = grad_L^perp Delta_L^-1 Omega, with grad_L^perp = (-(d_y - t d_z), d_z).

    The k = 0 row of u2 vanishes identically, so the y-velocity carries no
    z-average.
    """
    _require_sheared(omega, "Omega")
    g = omega.grid
    psi = omega.coeffs * streamfunction_symbol(g, t)
    mask = g.derivative_mask
    u1 = -1j * g.shear_eta(t) * mask * psi
    u2 = 1j * g.K * mask * psi
    return VelocityField(omega.with_coeffs(u1, t), omega.with_coeffs(u2, t), t)


def divergence_L(f1: SpectralField, f2: SpectralField, t: float) -> SpectralField:
    """d_z f1 + (d_y - t d_z) f2."""
    g = f1.grid
    mask = g.derivative_mask
    return f1.with_coeffs(1j * mask * (g.K * f1.coeffs + g.shear_eta(t) * f2.coeffs), t)


def curl_L(f1: SpectralField, f2: SpectralField, t: float) -> SpectralField:
    """grad_L^perp . (f1, f2) = -(d_y - t d_z) f1 + d_z f2."""
    g = f1.grid
    mask = g.derivative_mask
    return f1.with_coeffs(1j * mask * (-g.shear_eta(t) * f1.coeffs + g.K * f2.coeffs), t)


def chemotaxis_flux(N: SpectralField, C: SpectralField, t: float) -> tuple[SpectralField, SpectralField]:
    """Dealiased products (N d_z C, N (d_y - t d_z) C).

    Callers take ``divergence_L`` for the cell equation and ``curl_L`` for the
    vorticity forcing.
    """
    _require_sheared(N, "N")
    _check_compatible(N, C, time=t)
    g = N.grid
    mask = g.derivative_mask
    n = inverse(g, N.coeffs)
    cz = inverse(g, 1j * g.K * mask * C.coeffs)
    cy = inverse(g, 1j * g.shear_eta(t) * mask * C.coeffs)
    keep = g.dealias_mask
    return (
        N.with_coeffs(forward(g, n * cz) * keep, t),
        N.with_coeffs(forward(g, n * cy) * keep, t),
    )
