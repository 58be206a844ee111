"""
Time integration of the cell-density / vorticity system in sheared coordinates.

Unknowns are N (cells) and Omega (vorticity perturbation of Couette flow) in
the frame z = x - t*y.  The diffusion kappa*Delta_L N and nu*Delta_L Omega is
integrated exactly with the factor exp(-iota * int (k^2 + (eta - k s)^2) ds);
transport and chemotaxis are explicit, computed pseudo-spectrally in
divergence form, and advanced with the two-stage Heun scheme on the
integrating-factor form.

With Couette switched off the same code runs in the lab frame: symbols are
frozen at t = 0 and fields are tagged ``"lab"``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import diagnostics as diag
from .elliptic import chemical_symbol, streamfunction_symbol
from .multipliers import DELTA_MAX, MultiplierSpec
from .spectral import FrameError, Grid, SpectralField, forward, inverse

__all__ = [
    "PhysParams",
    "Switches",
    "DetectorSettings",
    "SimState",
    "BlowupVerdict",
    "BlowupHistory",
    "RunReport",
    "ResumePoint",
    "periodized_gaussian",
    "omega_mode",
    "omega_threshold_amplitude",
    "propagator_factor",
    "linear_propagator",
    "rhs_nonlinear",
    "stable_dt",
    "step",
    "detect_blowup",
    "active_wavenumber",
    "secular_time_bound",
    "initial_state",
    "run",
]


@dataclass(frozen=True)
class PhysParams:
    """Physical parameters; kappa = epsilon * nu and 0 < kappa <= nu <= 1."""

    kappa: float
    nu: float
    epsilon: float
    delta: float = DELTA_MAX
    s: float = 5.0
    M: float = 0.0

    def __post_init__(self):
        if not 0 < self.kappa <= self.nu <= 1:
            raise ValueError(f"need 0 < kappa <= nu <= 1, got kappa={self.kappa}, nu={self.nu}")
        if not 0 < self.epsilon <= 1:
            raise ValueError(f"need 0 < epsilon <= 1, got epsilon={self.epsilon}")
        if not math.isclose(self.kappa, self.epsilon * self.nu, rel_tol=1e-12):
            raise ValueError(
                f"kappa must equal epsilon*nu, got kappa={self.kappa}, "
                f"epsilon*nu={self.epsilon * self.nu}"
            )
        if not 0 < self.delta <= DELTA_MAX * (1 + 1e-12):
            raise ValueError(f"delta must lie in (0, 1/(16 pi^2)], got {self.delta}")
        if self.s < 0:
            raise ValueError(f"s must be >= 0, got {self.s}")

    @classmethod
    def from_kappa_nu(cls, kappa: float, nu: float, **kw) -> "PhysParams":
        return cls(kappa=kappa, nu=nu, epsilon=kappa / nu, **kw)

    @property
    def kappa_spec(self) -> MultiplierSpec:
        return MultiplierSpec(self.kappa, self.kappa, self.delta, self.s)

    @property
    def nu_spec(self) -> MultiplierSpec:
        return MultiplierSpec(self.nu, self.kappa, self.delta, self.s)

    def to_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in ("kappa", "nu", "epsilon", "delta", "s", "M")}


@dataclass(frozen=True)
class Switches:
    """Physics toggles.

    ``chemotaxis`` drops kappa div(N grad C) from the cell equation;
    ``fluid=False`` freezes Omega and removes transport by U;
    ``fluid_forcing`` drops the chemotactic curl forcing of Omega.
    Both nonlinear switches off gives the passive scalar in Couette flow.
    """

    couette: bool = True
    chemotaxis: bool = True
    fluid: bool = True
    fluid_forcing: bool = True

    @property
    def nonlinear(self) -> bool:
        return self.chemotaxis or self.fluid

    @property
    def frame(self) -> str:
        return "sheared" if self.couette else "lab"


@dataclass(frozen=True)
class DetectorSettings:
    blowup_factor: float = 1e4
    tail_threshold: float = 0.1
    leak_threshold: float = 1e-8
    leak_band: float = 0.4
    active_energy_tol: float = 1e-10
    positivity_tol: float = 1e-6
    resolved_tail: float = 1e-6
    edge_tol: float = 1e-4
    cfl: float = 0.4
    dt_max: float = 0.01


@dataclass(frozen=True)
class SimState:
    N: SpectralField
    Omega: SpectralField
    t: float
    params: PhysParams

    def __post_init__(self):
        if self.N.grid != self.Omega.grid:
            raise ValueError("N and Omega live on different grids")
        if self.N.frame != self.Omega.frame:
            raise ValueError("N and Omega are in different frames")

    @property
    def grid(self) -> Grid:
        return self.N.grid

    @property
    def frame(self) -> str:
        return self.N.frame

    @property
    def shear_time(self) -> float:
        return self.t if self.frame == "sheared" else 0.0

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.N.coeffs).all() and np.isfinite(self.Omega.coeffs).all())

    def with_coeffs(self, N: np.ndarray, Omega: np.ndarray, t: float) -> "SimState":
        return SimState(self.N.with_coeffs(N, t), self.Omega.with_coeffs(Omega, t), float(t), self.params)


@dataclass(frozen=True)
class BlowupVerdict:
    status: str  # completed | blowup | resolution_exceeded | mass_leak | interrupted
    t_stop: float
    peak_sup: float
    tail_fraction: float
    triggers: tuple[str, ...] = ()


@dataclass
class BlowupHistory:
    initial_sup: float
    peak_sup: float

    @classmethod
    def start(cls, state: SimState) -> "BlowupHistory":
        sup = float(state.N.physical().max())
        return cls(sup, sup)


# ---------------------------------------------------------------------------
# initial data


def periodized_gaussian(grid: Grid, mass: float, center=(np.pi, 0.0), sigma: float = 0.5) -> np.ndarray:
    """M/(2 pi sigma^2) exp(-|x - center|^2 / (2 sigma^2)), summed over periodic images."""
    z0, y0 = center
    mz = int(np.ceil(12 * sigma / grid.Lx)) + 1
    my = int(np.ceil(12 * sigma / grid.Ly)) + 1
    out = np.zeros((grid.Nx, grid.Ny))
    gz = np.zeros(grid.Nx)
    for m in range(-mz, mz + 1):
        gz += np.exp(-((grid.z - z0 - m * grid.Lx) ** 2) / (2 * sigma**2))
    gy = np.zeros(grid.Ny)
    for m in range(-my, my + 1):
        gy += np.exp(-((grid.y - y0 - m * grid.Ly) ** 2) / (2 * sigma**2))
    out = gz[:, None] * gy[None, :]
    return mass / (2 * np.pi * sigma**2) * out


def omega_mode(grid: Grid, k: int, j: int, amplitude: float) -> np.ndarray:
    """amplitude * cos(k z + eta_j y) on the physical grid."""
    if k == 0 and j == 0:
        raise ValueError("vorticity mode (0, 0) is the mean and is not allowed")
    eta = j * 2 * np.pi / grid.Ly
    return amplitude * np.cos(k * grid.Z + eta * grid.Y)


def omega_threshold_amplitude(grid: Grid, k: int, j: int, epsilon: float, nu: float, s: float) -> float:
    """Amplitude giving ||omega||_{H^s} = epsilon nu^(1/2) for a single cosine mode."""
    eta = j * 2 * np.pi / grid.Ly
    bessel = (1 + k**2 + eta**2) ** (s / 2)
    return epsilon * math.sqrt(nu) / (bessel * math.sqrt(grid.area / 2))


# ---------------------------------------------------------------------------
# linear part


def propagator_factor(grid: Grid, iota: float, t0: float, t1: float, couette: bool = True) -> np.ndarray:
    """exp(-iota * int_t0^t1 (k^2 + (eta - k s)^2) ds) on the grid.

    The integral is evaluated as (t1 - t0) (k^2 + (a^2 + a b + b^2)/3) with
    a = eta - k t0, b = eta - k t1, which avoids cancellation for short steps
    and covers k = 0.
    """
    if t1 < t0:
        raise ValueError(f"need t1 >= t0, got t0={t0}, t1={t1}")
    if couette:
        a = grid.shear_eta(t0)
        b = grid.shear_eta(t1)
        q = (a * a + a * b + b * b) / 3
    else:
        q = grid.ETA**2
    return np.exp(-iota * (t1 - t0) * (grid.K**2 + q))


def linear_propagator(f: SpectralField, iota: float, t0: float, t1: float) -> SpectralField:
    """Exact solution operator of d_t f = iota * Delta_L f from t0 to t1."""
    fac = propagator_factor(f.grid, iota, t0, t1, couette=f.frame == "sheared")
    return f.with_coeffs(f.coeffs * fac, t1)


# ---------------------------------------------------------------------------
# nonlinear part


def _nonlinear(grid: Grid, Nh, Wh, tau: float, kappa: float, sw: Switches):
    """Explicit tendencies of N and Omega plus the speeds needed for the step size."""
    g = grid
    keep = g.dealias_mask
    mask = g.derivative_mask
    iK = 1j * g.K * mask
    iQ = 1j * g.shear_eta(tau) * mask

    n = inverse(g, Nh)
    f1 = np.zeros_like(n)
    f2 = np.zeros_like(n)
    dW = np.zeros_like(Wh)
    v1max = v2max = 0.0

    if sw.fluid:
        psi = Wh * streamfunction_symbol(g, tau)
        u1 = inverse(g, -iQ * psi)
        u2 = inverse(g, iK * psi)
        w = inverse(g, Wh)
        f1 += u1 * n
        f2 += u2 * n
        h1 = u1 * w
        h2 = u2 * w
        v1, v2 = u1, u2
    else:
        v1 = v2 = None

    if sw.chemotaxis:
        Ch = Nh * chemical_symbol(g, tau)
        cz = inverse(g, iK * Ch)
        cy = inverse(g, iQ * Ch)
        g1 = n * cz
        g2 = n * cy
        f1 += kappa * g1
        f2 += kappa * g2
        if sw.fluid and sw.fluid_forcing:
            # curl_L(g) = -(d_y - t d_z) g1 + d_z g2, folded into the Omega flux
            h1 = h1 - kappa * g2
            h2 = h2 + kappa * g1
        v1 = kappa * cz if v1 is None else v1 + kappa * cz
        v2 = kappa * cy if v2 is None else v2 + kappa * cy

    if v1 is not None:
        v1max = float(np.abs(v1).max())
        v2max = float(np.abs(v2).max())

    dN = -(iK * forward(g, f1) + iQ * forward(g, f2)) * keep
    if sw.fluid:
        dW = -(iK * forward(g, h1) + iQ * forward(g, h2)) * keep
    info = {"sup_n": float(n.max()), "v1max": v1max, "v2max": v2max}
    return dN, dW, info


def rhs_nonlinear(state: SimState, switches: Switches = Switches()) -> tuple[SpectralField, SpectralField]:
    """Explicit tendencies (dN, dOmega), excluding the linear diffusion.

    dN = -div_L(U N) - kappa div_L(N grad_L C) and
    dOmega = -div_L(U Omega) + kappa curl_L(N grad_L C), both dealiased.
    """
    if state.frame != switches.frame:
        raise FrameError(f"state is in the {state.frame} frame but couette={switches.couette}")
    p = state.params
    dN, dW, _ = _nonlinear(state.grid, state.N.coeffs, state.Omega.coeffs, state.shear_time, p.kappa, switches)
    return state.N.with_coeffs(dN), state.Omega.with_coeffs(dW)


def stable_dt(grid: Grid, info: dict, tau: float, params: PhysParams, sw: Switches,
              settings: DetectorSettings = DetectorSettings()) -> float:
    """Step-size limit for the explicit terms.

    Advection: the spectral radius k_max |V1| + max|eta - k t| |V2| of the
    transport by V = U + kappa grad_L C must stay below cfl.  Chemotactic
    growth is bounded by kappa sup N.  Also capped by 0.05 kappa^(-1/3) and dt_max.
    """
    dt = min(settings.dt_max, 0.05 * params.kappa ** (-1 / 3))
    if not sw.nonlinear:
        return dt
    q_max = grid.eta_retained + grid.k_retained * abs(tau)
    speed = grid.k_retained * info["v1max"] + q_max * info["v2max"]
    if speed > 0:
        dt = min(dt, settings.cfl / speed)
    if sw.chemotaxis and info["sup_n"] > 0:
        dt = min(dt, 0.5 / (params.kappa * info["sup_n"]))
    return dt


def _heun(state: SimState, dt: float, sw: Switches, first=None):
    """One integrating-factor Heun step; returns the new state and the stage-1 info."""
    g, p = state.grid, state.params
    couette = sw.couette
    t0, t1 = state.t, state.t + dt
    tau0 = t0 if couette else 0.0
    tau1 = t1 if couette else 0.0
    LN = propagator_factor(g, p.kappa, t0, t1, couette)
    LW = propagator_factor(g, p.nu, t0, t1, couette) if sw.fluid else None
    Nh, Wh = state.N.coeffs, state.Omega.coeffs
    if first is None:
        first = _nonlinear(g, Nh, Wh, tau0, p.kappa, sw)
    dN0, dW0, info = first
    Ns = LN * (Nh + dt * dN0)
    Ws = LW * (Wh + dt * dW0) if sw.fluid else Wh
    dN1, dW1, _ = _nonlinear(g, Ns, Ws, tau1, p.kappa, sw)
    keep = g.dealias_mask
    N1 = (LN * (Nh + 0.5 * dt * dN0) + 0.5 * dt * dN1) * keep
    W1 = (LW * (Wh + 0.5 * dt * dW0) + 0.5 * dt * dW1) * keep if sw.fluid else Wh
    return N1, W1, info


def step(state: SimState, dt: float, switches: Switches = Switches()) -> SimState:
    """Advance by dt.  Non-finite coefficients are not raised on; check ``is_finite``."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    if state.frame != switches.frame:
        raise FrameError(f"state is in the {state.frame} frame but couette={switches.couette}")
    t1 = state.t + dt
    if not switches.nonlinear:
        p = state.params
        couette = switches.couette
        N1 = state.N.coeffs * propagator_factor(state.grid, p.kappa, state.t, t1, couette)
        return state.with_coeffs(N1, state.Omega.coeffs, t1)
    N1, W1, _ = _heun(state, dt, switches)
    return state.with_coeffs(N1, W1, t1)


# ---------------------------------------------------------------------------
# monitors


def detect_blowup(state: SimState, history: BlowupHistory,
                  settings: DetectorSettings = DetectorSettings()) -> BlowupVerdict | None:
    """Blowup verdict when sup N, the spectral tail or non-finite values say so; else None."""
    if not state.is_finite():
        return BlowupVerdict("blowup", state.t, history.peak_sup, float("nan"), ("non_finite",))
    sup = float(state.N.physical().max())
    history.peak_sup = max(history.peak_sup, sup)
    tail = diag.tail_fraction(state.N)
    triggers = []
    if sup > settings.blowup_factor * history.initial_sup:
        triggers.append("sup_growth")
    if tail > settings.tail_threshold:
        triggers.append("spectral_tail")
    if triggers:
        return BlowupVerdict("blowup", state.t, history.peak_sup, tail, tuple(triggers))
    return None


def active_wavenumber(state: SimState, tol: float = 1e-10) -> int:
    """Largest |k| != 0 whose share of the total (N + Omega) coefficient energy exceeds tol."""
    g = state.grid
    e = np.abs(state.N.coeffs) ** 2 + np.abs(state.Omega.coeffs) ** 2
    total = e.sum()
    if total == 0:
        return 0
    per_k = e.sum(axis=1) / total
    active = np.abs(g.kz)[(per_k > tol) & (g.kz != 0)]
    return int(active.max()) if active.size else 0


def secular_time_bound(grid: Grid, k_active: int) -> float:
    """eta_max / (2 k_active): the time at which the critical layer eta = k t of
    mode k_active reaches half the retained eta range."""
    if k_active == 0:
        return math.inf
    return grid.eta_retained / (2 * k_active)


# ---------------------------------------------------------------------------
# driver


@dataclass
class ResumePoint:
    state: SimState
    acc: diag.Accumulators
    history: BlowupHistory
    steps: int
    out_index: int
    records: list = field(default_factory=list)
    pending_leak: BlowupVerdict | None = None


@dataclass
class RunReport:
    config: object
    records: list
    verdict: BlowupVerdict
    flags: list
    steps: int
    resolution: dict
    rates: dict

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def initial_state(config) -> SimState:
    g = config.grid
    frame = config.switches.frame
    n = np.zeros((g.Nx, g.Ny))
    for b in config.blobs:
        n += periodized_gaussian(g, b.mass, b.center, b.sigma)
    N = SpectralField(g, forward(g, n) * g.dealias_mask, frame, 0.0)
    w = np.zeros((g.Nx, g.Ny))
    om = config.omega
    if om.kind == "mode":
        w = omega_mode(g, om.k, om.j, om.amplitude)
    elif om.kind == "threshold":
        p = config.params
        a = omega_threshold_amplitude(g, om.k, om.j, p.epsilon, p.nu, p.s)
        w = omega_mode(g, om.k, om.j, a)
    W = SpectralField(g, forward(g, w) * g.dealias_mask, frame, 0.0)
    return SimState(N, W, 0.0, config.params)


def _output_time(config, i: int) -> float:
    return i * config.out_interval


def run(config, *, start: ResumePoint | None = None,
        on_output: Callable | None = None, stop_at: float | None = None) -> RunReport:
    """Integrate from t = 0 (or a resume point) to t_max or until a monitor fires.

    ``on_output(record, point)`` is called at every output time with the
    current ``ResumePoint``.  ``stop_at`` ends the run early with status
    ``interrupted`` (used to exercise checkpoint/resume).
    """
    sw: Switches = config.switches
    settings: DetectorSettings = config.detector
    p: PhysParams = config.params
    n_out = int(round(config.t_max / config.out_interval))

    def integrands(st: SimState):
        return diag.bootstrap_integrands(st.N, st.Omega, st.t, st.shear_time,
                                         p.kappa_spec, p.nu_spec, p.kappa, p.nu)

    if start is None:
        state = initial_state(config)
        point = ResumePoint(state, diag.Accumulators(), BlowupHistory.start(state), 0, 0, [])
        rec = diag.collect(state.N, state.Omega, state.t, state.shear_time, p, point.acc, 0, 0.0)
        point.records.append(rec)
        if on_output:
            on_output(rec, point)
    else:
        point = start

    flags: list[str] = []
    g = config.grid
    k0 = active_wavenumber(point.state, settings.active_energy_tol)
    resolution = {
        "enforced": bool(sw.nonlinear and sw.couette),
        "edge_tol": settings.edge_tol,
        "edge_share_max": max((r.edge_share for r in point.records), default=0.0),
        "t_bound_all_modes": secular_time_bound(g, g.k_retained),
        "k_active_initial": k0,
        "t_bound_initial": secular_time_bound(g, k0),
    }
    verdict = None
    state = point.state
    before = integrands(state)
    last_dt = 0.0

    while point.out_index < n_out and verdict is None:
        target = _output_time(config, point.out_index + 1)
        if stop_at is not None and state.t >= stop_at - 1e-12:
            verdict = BlowupVerdict("interrupted", state.t, point.history.peak_sup, diag.tail_fraction(state.N))
            break
        # integrate to the next output time
        while True:
            remaining = target - state.t
            if sw.nonlinear:
                first = _nonlinear(state.grid, state.N.coeffs, state.Omega.coeffs,
                                   state.shear_time, p.kappa, sw)
                dt_lim = stable_dt(state.grid, first[2], state.shear_time, p, sw, settings)
            else:
                first = None
                dt_lim = remaining
            nsub = max(1, math.ceil(remaining / dt_lim - 1e-9))
            dt = remaining / nsub
            landing = nsub == 1
            t1 = target if landing else state.t + dt
            if sw.nonlinear:
                N1, W1, _ = _heun(state, dt, sw, first)
            else:
                N1 = state.N.coeffs * propagator_factor(state.grid, p.kappa, state.t, t1, sw.couette)
                W1 = state.Omega.coeffs
            state = state.with_coeffs(N1, W1, t1)
            point.steps += 1
            last_dt = dt
            verdict = detect_blowup(state, point.history, settings) if sw.nonlinear else (
                None if state.is_finite() else BlowupVerdict("blowup", state.t, point.history.peak_sup,
                                                             float("nan"), ("non_finite",)))
            if verdict is not None:
                break
            after = integrands(state)
            point.acc.advance(dt, before, after)
            before = after
            if landing:
                break
        point.state = state
        if verdict is not None:
            break
        point.out_index += 1
        rec = diag.collect(state.N, state.Omega, state.t, state.shear_time, p, point.acc, point.steps, last_dt)
        point.records.append(rec)
        if rec.min_N < -settings.positivity_tol * rec.sup_N and "positivity" not in flags:
            flags.append("positivity")
        if on_output:
            on_output(rec, point)
        if rec.boundary_mass_fraction > settings.leak_threshold:
            leak = BlowupVerdict("mass_leak", state.t, point.history.peak_sup, rec.tail_fraction,
                                 ("boundary_mass",))
            # ringing from an unresolved collapse also lands in the band; let the
            # blowup monitors decide first and report the leak only if they never fire
            if rec.tail_fraction <= settings.resolved_tail:
                verdict = leak
            elif point.pending_leak is None:
                point.pending_leak = leak
        resolution["edge_share_max"] = max(resolution["edge_share_max"], rec.edge_share)
        if verdict is None and resolution["enforced"] and rec.edge_share > settings.edge_tol:
            verdict = BlowupVerdict("resolution_exceeded", state.t, point.history.peak_sup,
                                    rec.tail_fraction, (f"edge_share={rec.edge_share:.3g}",))

    if verdict is None and point.pending_leak is not None:
        verdict = point.pending_leak
    if verdict is None:
        verdict = BlowupVerdict("completed", point.state.t, point.history.peak_sup,
                                diag.tail_fraction(point.state.N))
    report = RunReport(config, point.records, verdict, flags, point.steps, resolution, {})
    report.rates = fit_rates(report)
    return report


def fit_rates(report: RunReport, modes=(1, 2, 3, 4)) -> dict:
    """Fitted decay rate of each z-mode of N, or None where the window is too short."""
    t = report.series("t")
    out = {}
    for k in modes:
        try:
            out[f"rate_k{k}"] = diag.fit_enhanced_dissipation_rate(t, report.series(f"amp_N_k{k}"))
        except diag.WindowTooShortError:
            out[f"rate_k{k}"] = None
    return out
