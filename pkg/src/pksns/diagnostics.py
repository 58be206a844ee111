"""
Monitored quantities: mass, free energies, second moment, weighted norms,
the four bootstrap functionals and the enhanced-dissipation rate fit.

Norm conventions (Parseval, coefficients normalised by 1/(Nx*Ny)):

* 2-D norms on the box:  ||f||^2 = 2*pi*Ly * sum |f_hat|^2
* z-averages are functions of y alone: ||f_0||^2_{H^s(R)} = Ly * sum <eta>^(2s) |f_hat(0, eta)|^2
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .elliptic import biot_savart, chemical_symbol
from .multipliers import MultiplierSpec, _weight_derivatives
from .spectral import Grid, SpectralField, inverse

__all__ = [
    "DiagnosticsRecord",
    "Accumulators",
    "FreeEnergy",
    "WindowTooShortError",
    "mass",
    "free_energy",
    "second_moment",
    "mode_amplitude",
    "weighted_norms",
    "bootstrap_integrands",
    "bootstrap_functionals",
    "ed_weighted_norm",
    "tail_fraction",
    "boundary_mass_fraction",
    "edge_share",
    "fit_enhanced_dissipation_rate",
    "CSV_COLUMNS",
]


class WindowTooShortError(ValueError):
    """The mode never decays through enough decades to fit a rate."""


def mass(N: SpectralField) -> float:
    return float(N.grid.area * N.coeffs[0, 0].real)


def second_moment(N: SpectralField) -> float:
    """int N y^2 dV by the periodic midpoint rule."""
    g = N.grid
    n = N.physical()
    return float(np.sum(n * g.Y**2) * g.cell_area)


@dataclass(frozen=True)
class FreeEnergy:
    F: float
    E: float
    kinetic: float
    clamped_mass: float
    flagged: bool


def free_energy(N: SpectralField, C: SpectralField, U=None) -> FreeEnergy:
    """E = int n log n - n c / 2 and F = E + int |u|^2 / 2.

    Negative undershoots of n are clamped to zero inside n log n only; the
    clamped mass is reported and flagged above 1e-4 of the total mass.
    """
    g = N.grid
    n = N.physical()
    c = C.physical()
    pos = np.clip(n, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        nlogn = np.where(pos > 0, pos * np.log(np.where(pos > 0, pos, 1.0)), 0.0)
    dA = g.cell_area
    E = float(np.sum(nlogn - 0.5 * n * c) * dA)
    kin = 0.0
    if U is not None:
        kin = float(0.5 * np.sum(U.u1.physical() ** 2 + U.u2.physical() ** 2) * dA)
    clamped = float(-np.sum(n[n < 0]) * dA)
    total = float(np.sum(np.abs(n)) * dA)
    return FreeEnergy(E + kin, E, kin, clamped, clamped > 1e-4 * max(total, 1e-300))


def mode_amplitude(f: SpectralField, k: int) -> float:
    """L^2 norm of the +-k Fourier component in z of a field."""
    g = f.grid
    rows = [k % g.Nx] if k == 0 else [k % g.Nx, (-k) % g.Nx]
    e = sum(np.sum(np.abs(f.coeffs[r]) ** 2) for r in rows)
    return float(np.sqrt(g.area * e))


def tail_fraction(N: SpectralField) -> float:
    """Share of the fluctuation energy sitting in the outer third of the retained shell."""
    g = N.grid
    kk = np.abs(g.kz)[:, None] / g.k_retained
    jj = np.abs(g.j_index)[None, :] / g.j_retained
    shell = np.maximum(kk, jj)
    e = np.abs(N.coeffs) ** 2
    e = np.where(g.dealias_mask, e, 0.0)
    e[0, 0] = 0.0
    tot = e.sum()
    if tot == 0:
        return 0.0
    return float(e[shell > 2 / 3].sum() / tot)


def boundary_mass_fraction(N: SpectralField, band: float = 0.4) -> float:
    """|int_{|y| > band*Ly} N dV| / |mass|.

    The band integral is taken exactly on the Fourier series of the
    z-average, so grid-scale ripple does not register as leaked mass.
    """
    g = N.grid
    m = abs(mass(N))
    if m == 0:
        return 0.0
    # in s = y + Ly/2 the band is the periodic interval |s| <= a
    a = (0.5 - band) * g.Ly
    eta = g.ky
    w = np.full(g.Ny, 2 * a)
    nz = eta != 0
    w[nz] = 2 * np.sin(eta[nz] * a) / eta[nz]
    inside = g.Lx * float(np.sum(N.coeffs[0].real * w))
    return abs(inside) / m


def _zero_row(g: Grid):
    nz = np.ones((g.Nx, 1), bool)
    nz[0] = False
    return nz


def _weights(g: Grid, t: float, spec: MultiplierSpec):
    """A(t,k,eta) on the grid and -dM/dt / M."""
    w_orr, w_dif, dt_orr, dt_dif, _, _ = _weight_derivatives(t, g.K, g.ETA, spec.iota)
    m = w_orr * w_dif
    mdot = w_orr * dt_dif + w_dif * dt_orr
    growth = np.exp(spec.delta * spec.kappa ** (1 / 3) * np.abs(g.K) ** (2 / 3) * t)
    A = m * growth * (1 + g.K**2 + g.ETA**2) ** (spec.s / 2)
    return A, -mdot / m


def ed_weighted_norm(f: SpectralField, kappa: float, delta: float, t: float) -> float:
    """|| exp(delta kappa^(1/3) |d_z|^(2/3) t) f_neq ||_2."""
    g = f.grid
    w = np.exp(delta * kappa ** (1 / 3) * np.abs(g.K) ** (2 / 3) * t) * _zero_row(g)
    return float(np.sqrt(g.area * np.sum(w**2 * np.abs(f.coeffs) ** 2)))


def _hs_zero_mode_sq(f: SpectralField, s: float, extra=None) -> float:
    g = f.grid
    w = (1 + g.ky**2) ** s
    if extra is not None:
        w = w * extra
    return float(g.Ly * np.sum(w * np.abs(f.coeffs[0]) ** 2))


def weighted_norms(N: SpectralField, Omega: SpectralField, t: float, kspec, nspec) -> dict:
    """Static parts of the bootstrap functionals (norms, not squared)."""
    g = N.grid
    nz = _zero_row(g)
    A_k, _ = _weights(g, t, kspec)
    A_n, _ = _weights(g, t, nspec)
    return {
        "norm_AkappaN_neq": float(np.sqrt(g.area * np.sum(nz * (A_k * np.abs(N.coeffs)) ** 2))),
        "norm_AnuOmega_neq": float(np.sqrt(g.area * np.sum(nz * (A_n * np.abs(Omega.coeffs)) ** 2))),
        "norm_N0_Hs": float(np.sqrt(_hs_zero_mode_sq(N, kspec.s))),
        "norm_Omega0_Hs": float(np.sqrt(_hs_zero_mode_sq(Omega, nspec.s))),
    }


def bootstrap_integrands(N, Omega, t, shear_t, kspec, nspec, kappa, nu) -> np.ndarray:
    """Time-integrands of the three dissipation integrals at one instant.

    Returns [cell remainder, vorticity remainder, vorticity z-average]:
    ||sqrt(-dM/M) A f_neq||^2 + iota ||A sqrt(-Delta_L) f_neq||^2 for the two
    remainders, and nu ||d_y Omega_0||^2_{H^s} for the average.
    """
    g = N.grid
    nz = _zero_row(g)
    lap = g.K**2 + g.shear_eta(shear_t) ** 2
    out = np.empty(3)
    for i, (f, spec, iota) in enumerate(((N, kspec, kappa), (Omega, nspec, nu))):
        A, rate = _weights(g, t, spec)
        e = nz * (A * np.abs(f.coeffs)) ** 2
        out[i] = g.area * np.sum(e * (rate + iota * lap))
    out[2] = nu * _hs_zero_mode_sq(Omega, nspec.s, extra=g.ky**2)
    return out


@dataclass
class Accumulators:
    """Running trapezoid integrals of ``bootstrap_integrands``."""

    int_N_neq: float = 0.0
    int_Omega_neq: float = 0.0
    int_Omega0: float = 0.0

    def advance(self, dt: float, before: np.ndarray, after: np.ndarray) -> None:
        inc = 0.5 * dt * (before + after)
        self.int_N_neq += float(inc[0])
        self.int_Omega_neq += float(inc[1])
        self.int_Omega0 += float(inc[2])

    def to_dict(self) -> dict:
        return asdict(self)


def bootstrap_functionals(N, Omega, t, kspec, nspec, acc: Accumulators) -> dict:
    """Left-hand sides of the four bootstrap hypotheses, plus their parts."""
    out = weighted_norms(N, Omega, t, kspec, nspec)
    out.update(acc.to_dict())
    out["hyp_N_neq"] = out["norm_AkappaN_neq"] ** 2 + acc.int_N_neq
    out["hyp_N0"] = out["norm_N0_Hs"] ** 2
    out["hyp_Omega_neq"] = out["norm_AnuOmega_neq"] ** 2 + acc.int_Omega_neq
    out["hyp_Omega0"] = out["norm_Omega0_Hs"] ** 2 + acc.int_Omega0
    return out


@dataclass
class DiagnosticsRecord:
    t: float
    steps: int
    dt: float
    mass: float
    free_energy_F: float
    energy_E: float
    kinetic_energy: float
    second_moment: float
    min_N: float
    sup_N: float
    sup_Omega: float
    norm_AkappaN_neq: float
    norm_AnuOmega_neq: float
    norm_N0_Hs: float
    norm_Omega0_Hs: float
    int_N_neq: float
    int_Omega_neq: float
    int_Omega0: float
    hyp_N_neq: float
    hyp_N0: float
    hyp_Omega_neq: float
    hyp_Omega0: float
    ed_norm_N_neq: float
    ed_norm_Omega_neq: float
    boundary_mass_fraction: float
    tail_fraction: float
    edge_share: float
    clamped_mass: float
    amp_N_k1: float
    amp_N_k2: float
    amp_N_k3: float
    amp_N_k4: float
    amp_Omega_k1: float

    def row(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            out.append(str(v) if isinstance(v, int) else repr(float(v)))
        return out

    @property
    def bootstrap_integrals(self) -> tuple[float, float, float]:
        return (self.int_N_neq, self.int_Omega_neq, self.int_Omega0)


CSV_COLUMNS = [f.name for f in fields(DiagnosticsRecord)]


def collect(N, Omega, t, shear_t, params, acc: Accumulators, steps: int, dt: float) -> DiagnosticsRecord:
    """Evaluate every monitored quantity for one snapshot."""
    g = N.grid
    kspec, nspec = params.kappa_spec, params.nu_spec
    C = N.with_coeffs(N.coeffs * chemical_symbol(g, shear_t))
    # lab-frame runs use shear_t = 0, where the sheared symbols reduce to the plain ones
    U = biot_savart(_as_sheared(Omega), shear_t)
    fe = free_energy(N, C, U)
    n = N.physical()
    boot = bootstrap_functionals(N, Omega, t, kspec, nspec, acc)
    return DiagnosticsRecord(
        t=float(t),
        steps=int(steps),
        dt=float(dt),
        mass=mass(N),
        free_energy_F=fe.F,
        energy_E=fe.E,
        kinetic_energy=fe.kinetic,
        second_moment=float(np.sum(n * g.Y**2) * g.cell_area),
        min_N=float(n.min()),
        sup_N=float(n.max()),
        sup_Omega=float(np.abs(inverse(g, Omega.coeffs)).max()),
        ed_norm_N_neq=ed_weighted_norm(N, params.kappa, params.delta, t),
        ed_norm_Omega_neq=ed_weighted_norm(Omega, params.kappa, params.delta, t),
        boundary_mass_fraction=boundary_mass_fraction(N),
        tail_fraction=tail_fraction(N),
        edge_share=edge_share(N, Omega),
        clamped_mass=fe.clamped_mass,
        amp_N_k1=mode_amplitude(N, 1),
        amp_N_k2=mode_amplitude(N, 2),
        amp_N_k3=mode_amplitude(N, 3),
        amp_N_k4=mode_amplitude(N, 4),
        amp_Omega_k1=mode_amplitude(Omega, 1),
        **boot,
    )


def edge_share(N: SpectralField, Omega: SpectralField) -> float:
    """Share of the (N + Omega) energy held by k != 0 modes with |eta| > eta_max / 2.

    Shear carries the unmixed part of mode k to eta = k t; this measures how
    much of it has drifted into the outer half of the retained eta range.
    """
    g = N.grid
    e = np.abs(N.coeffs) ** 2 + np.abs(Omega.coeffs) ** 2
    total = e.sum()
    if total == 0:
        return 0.0
    far = (np.abs(g.ETA) > g.eta_retained / 2) & (g.K != 0)
    return float(e[far].sum() / total)


def _as_sheared(f: SpectralField) -> SpectralField:
    return f if f.frame == "sheared" else replace(f, frame="sheared")


def fit_enhanced_dissipation_rate(times, amplitudes, floor_factor: float = 1e3, min_decades: float = 3.0) -> float:
    """Effective exponential decay rate of one mode.

    Least-squares slope of log(amplitude) against t, over the window from the
    first time the mode energy falls below half its maximum until the
    amplitude comes within ``floor_factor`` of round-off (relative to its
    maximum).  The window must span ``min_decades`` decades of energy.
    Returns 0.0 for a mode that never halves its energy.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(amplitudes, dtype=float)
    if t.size != a.size or t.size == 0:
        raise ValueError("times and amplitudes must be non-empty and of equal length")
    e = a**2
    imax = int(np.argmax(e))
    emax = e[imax]
    if emax == 0:
        raise WindowTooShortError("mode is identically zero")
    below = np.nonzero(e[imax:] < 0.5 * emax)[0]
    if below.size == 0:
        return 0.0
    i0 = imax + below[0]
    floor = floor_factor * np.finfo(float).eps * a[imax]
    above = a[i0:] > floor
    stop = np.nonzero(~above)[0]
    i1 = i0 + (stop[0] if stop.size else above.size)
    if i1 - i0 < 3 or e[i0] / e[i1 - 1] < 10**min_decades:
        raise WindowTooShortError(
            f"decay window [{t[i0]:.3g}, {t[i1 - 1]:.3g}] spans "
            f"{np.log10(e[i0] / max(e[i1 - 1], 1e-300)):.2f} decades, need {min_decades}"
        )
    slope = np.polyfit(t[i0:i1], np.log(a[i0:i1]), 1)[0]
    return float(-slope)
