"""
Time-dependent Fourier weights for the energy method near Couette flow.

Two arctan weights are built from the Orr variable a = t - eta/k:

* ``orr_weight``: pi - arctan(a) for k != 0, pi on k = 0.
* ``diffusive_weight``: pi - arctan(iota^(1/3) |k|^(2/3) a), switched on only
  in the band 0 < |k| <= iota^(-1/2); pi elsewhere.

Their product is the ghost multiplier ``multiplier`` (values in
[pi^2/4, 9 pi^2/4], decreasing in t), and ``energy_weight`` adds the
enhanced-dissipation growth exp(delta kappa^(1/3) |k|^(2/3) t) and the
Sobolev weight <k, eta>^s.  Both the kappa- and nu-weights use kappa in the
exponential.

All functions broadcast over numpy arrays of (t, k, eta).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .spectral import SpectralField

__all__ = [
    "DELTA_MAX",
    "MultiplierSpec",
    "LemmaRanges",
    "CheckResult",
    "LemmaReport",
    "in_band",
    "diffusive_weight",
    "orr_weight",
    "multiplier",
    "energy_weight",
    "multiplier_dt",
    "multiplier_deta",
    "verify_lemma_suite",
    "commutator_constant",
    "apply_A_weight",
    "W_iota",
    "W_cal",
    "M_iota",
    "A_iota",
    "dt_M_iota",
]

DELTA_MAX = 1.0 / (16 * np.pi**2)


@dataclass(frozen=True)
class MultiplierSpec:
    """Parameters of one weight family.

    ``iota`` is the diffusivity the weight is tuned to (kappa for the cell
    density, nu for the vorticity); ``kappa`` always sets the exponential rate.
    """

    iota: float
    kappa: float
    delta: float = DELTA_MAX
    s: float = 0.0

    def __post_init__(self):
        if not 0 < self.iota <= 1:
            raise ValueError(f"iota must lie in (0, 1], got {self.iota}")
        if not 0 < self.kappa <= 1:
            raise ValueError(f"kappa must lie in (0, 1], got {self.kappa}")
        if self.kappa > self.iota * (1 + 1e-12):
            raise ValueError(f"need kappa <= iota, got kappa={self.kappa}, iota={self.iota}")
        if not 0 <= self.delta <= DELTA_MAX * (1 + 1e-12):
            raise ValueError(f"delta must lie in [0, 1/(16 pi^2)], got {self.delta}")
        if self.s < 0:
            raise ValueError(f"s must be >= 0, got {self.s}")


def in_band(k, iota):
    """Indicator of 0 < |k| <= iota^(-1/2), closed at the upper end."""
    k = np.asarray(k, dtype=float)
    return (k != 0) & (k * k * iota <= 1 + 1e-12)


def _orr(t, k, eta):
    """Orr variable t - eta/k with zeros where k = 0, and the k != 0 mask."""
    k = np.asarray(k, dtype=float)
    nz = k != 0
    safe_k = np.where(nz, k, 1.0)
    a = np.where(nz, t - eta / safe_k, 0.0)
    return a, nz, safe_k


def _rate(k, iota):
    return iota ** (1 / 3) * np.abs(np.asarray(k, dtype=float)) ** (2 / 3)


def diffusive_weight(t, k, eta, iota):
    a, _, _ = _orr(t, k, eta)
    return np.pi - np.arctan(_rate(k, iota) * a) * in_band(k, iota)


def orr_weight(t, k, eta):
    a, nz, _ = _orr(t, k, eta)
    return np.pi - np.arctan(a) * nz


def multiplier(t, k, eta, iota):
    return diffusive_weight(t, k, eta, iota) * orr_weight(t, k, eta)


def energy_weight(t, k, eta, spec: MultiplierSpec):
    k = np.asarray(k, dtype=float)
    growth = np.exp(spec.delta * spec.kappa ** (1 / 3) * np.abs(k) ** (2 / 3) * t)
    sobolev = (1 + k**2 + np.asarray(eta, dtype=float) ** 2) ** (spec.s / 2)
    return multiplier(t, k, eta, spec.iota) * growth * sobolev


def _weight_derivatives(t, k, eta, iota):
    """Weights and their t- and eta-derivatives, evaluated together."""
    a, nz, safe_k = _orr(t, k, eta)
    band = in_band(k, iota)
    c = _rate(k, iota)
    w_orr = np.pi - np.arctan(a) * nz
    w_dif = np.pi - np.arctan(c * a) * band
    lor_orr = nz / (1 + a * a)
    lor_dif = band * c / (1 + (c * a) ** 2)
    # d/dt a = 1, d/deta a = -1/k
    return w_orr, w_dif, -lor_orr, -lor_dif, lor_orr / safe_k, lor_dif / safe_k


def multiplier_dt(t, k, eta, iota):
    """Analytic d/dt of the ghost multiplier; never positive."""
    w_orr, w_dif, dt_orr, dt_dif, _, _ = _weight_derivatives(t, k, eta, iota)
    return w_orr * dt_dif + w_dif * dt_orr


def multiplier_deta(t, k, eta, iota):
    w_orr, w_dif, _, _, de_orr, de_dif = _weight_derivatives(t, k, eta, iota)
    return w_orr * de_dif + w_dif * de_orr


# alternative public names
W_iota = diffusive_weight
W_cal = orr_weight
M_iota = multiplier
A_iota = energy_weight
dt_M_iota = multiplier_dt


def apply_A_weight(f: SpectralField, spec: MultiplierSpec, t: float) -> SpectralField:
    """Multiply every coefficient of a sheared-frame field by A(t, k, eta)."""
    g = f.grid
    return f.with_coeffs(f.coeffs * energy_weight(t, g.K, g.ETA, spec), t)


# ---------------------------------------------------------------------------
# verification battery


@dataclass(frozen=True)
class LemmaRanges:
    T: float = 200.0
    K: int = 64
    H: float = 256.0


@dataclass
class CheckResult:
    inequality_id: str
    iota: float
    samples: int
    violations: int
    worst_margin: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


@dataclass
class LemmaReport:
    checks: list[CheckResult] = field(default_factory=list)
    rel_slack: float = 1e-9

    @property
    def total_violations(self) -> int:
        return sum(c.violations for c in self.checks)

    @property
    def passed(self) -> bool:
        return self.total_violations == 0

    def by_id(self, inequality_id: str) -> list[CheckResult]:
        return [c for c in self.checks if c.inequality_id == inequality_id]

    def to_json(self) -> str:
        return json.dumps(
            {"rel_slack": self.rel_slack, "checks": [asdict(c) for c in self.checks]},
            indent=2,
        )


def _draw_t_k_eta(n, ranges: LemmaRanges, rng, k_values=None):
    t = rng.uniform(0.0, ranges.T, n)
    if k_values is None:
        k = rng.integers(-ranges.K, ranges.K + 1, n).astype(float)
    else:
        k = rng.choice(np.asarray(k_values, dtype=float), n)
    eta = rng.uniform(-ranges.H, ranges.H, n)
    # half the samples sit near the critical layer eta ~ k t, where the
    # arctan weights actually move
    near = rng.random(n) < 0.5
    cand = k * (t + rng.normal(0.0, 3.0, n))
    use = near & (np.abs(cand) <= ranges.H)
    eta = np.where(use, cand, eta)
    return t, k, eta


def _draw_partner(eta, ranges: LemmaRanges, rng):
    n = eta.size
    xi = rng.uniform(-ranges.H, ranges.H, n)
    close = rng.random(n) < 0.5
    cand = eta + rng.normal(0.0, 2.0, n)
    use = close & (np.abs(cand) <= ranges.H)
    return np.where(use, cand, xi)


def _upper_check(name, iota, lhs, rhs, slack):
    """lhs <= rhs up to relative slack; margin is (rhs - lhs)/|rhs|."""
    scale = np.maximum(np.abs(rhs), np.finfo(float).tiny)
    margin = (rhs - lhs) / scale
    return CheckResult(name, float(iota), int(lhs.size), int(np.sum(margin < -slack)), float(margin.min()))


def verify_lemma_suite(
    sample_count: int = 100_000,
    ranges: LemmaRanges = LemmaRanges(),
    iotas=(1.0, 0.1, 0.01),
    seed: int = 0,
    rel_slack: float = 1e-9,
    literal_m1: bool = False,
) -> LemmaReport:
    """Randomised check of the multiplier inequalities with explicit constants.

    Violations are counted and reported; nothing is raised.  ``M_1`` checks
    that the iota-weight is identically pi off its band and that M = pi^2 on
    k = 0.  ``literal_m1=True`` adds ``M_1_literal``, the stronger claim
    M = pi^2 for every k off the band, which fails whenever k != 0 because
    the Orr weight still moves there.
    """
    if isinstance(iotas, MultiplierSpec):
        iotas = (iotas.iota,)
    rng = np.random.default_rng(seed)
    report = LemmaReport(rel_slack=rel_slack)
    pi = np.pi
    for iota in iotas:
        t, k, eta = _draw_t_k_eta(sample_count, ranges, rng)
        m = multiplier(t, k, eta, iota)
        mt = multiplier_dt(t, k, eta, iota)
        me = multiplier_deta(t, k, eta, iota)
        ak = np.abs(k)
        nz = k != 0

        # off the band the iota-weight is frozen at pi, and at k = 0 both
        # weights are, so M = pi^2 there
        off = ~in_band(k, iota)
        w_dif = diffusive_weight(t, k, eta, iota)
        dev = np.concatenate([np.abs(w_dif[off] - pi) / pi, np.abs(m[~nz] - pi**2) / pi**2])
        report.checks.append(
            CheckResult("M_1", iota, int(dev.size), int(np.sum(dev > rel_slack)),
                        float(-dev.max()) if dev.size else 0.0)
        )
        if literal_m1:
            dev = np.abs(m[off] - pi**2) / pi**2
            report.checks.append(
                CheckResult("M_1_literal", iota, int(off.sum()), int(np.sum(dev > rel_slack)),
                            float(-dev.max()) if dev.size else 0.0)
            )

        lo = (m - pi**2 / 4) / (pi**2 / 4)
        hi = (9 * pi**2 / 4 - m) / (9 * pi**2 / 4)
        margin = np.minimum(lo, hi)
        report.checks.append(
            CheckResult("M_bound", iota, m.size, int(np.sum(margin < -rel_slack)), float(margin.min()))
        )

        shear = k[nz] ** 2 / (k[nz] ** 2 + (eta[nz] - k[nz] * t[nz]) ** 2)
        report.checks.append(_upper_check("M_property_common_dot_M", iota, pi / 2 * shear, -mt[nz], rel_slack))
        report.checks.append(_upper_check("M_property_common_pa_eta", iota, np.abs(me[nz]), 4 * pi / ak[nz], rel_slack))

        kb = np.arange(1, int(np.floor(iota**-0.5 + 1e-9)) + 1, dtype=float)
        kb = np.concatenate([-kb, kb])
        tb, kk, eb = _draw_t_k_eta(sample_count, ranges, rng, k_values=kb)
        xb = _draw_partner(eb, ranges, rng)
        ratio = np.sqrt(-multiplier_dt(tb, kk, eb, iota)) / np.sqrt(-multiplier_dt(tb, kk, xb, iota))
        report.checks.append(_upper_check("M_5", iota, ratio, 2 * np.sqrt(1 + (eb - xb) ** 2), rel_slack))

        # k = 0 has a zero left-hand side
        rhs = -mt[nz] / m[nz] + iota * (k[nz] ** 2 + (eta[nz] - k[nz] * t[nz]) ** 2)
        lhs = iota ** (1 / 3) * ak[nz] ** (2 / 3) / (3 * pi)
        report.checks.append(_upper_check("M_property_ED", iota, lhs, rhs, rel_slack))
    return report


def commutator_constant(
    samples=100_000,
    s: float = 2,
    iota: float = 0.01,
    ranges: LemmaRanges = LemmaRanges(),
    seed: int = 0,
) -> float:
    """Empirical sup of the commutator ratio

        |M(t,k,eta)<k,eta>^s - M(t,k,xi)<k,xi>^s| |k| / (|eta - xi| (<eta-xi>^s + <k,xi>^s))

    over k != 0.  ``samples`` is a count (drawn from ``ranges``) or a tuple
    of arrays (t, k, eta, xi).  Pairs with eta == xi are skipped.
    """
    if isinstance(samples, (int, np.integer)):
        rng = np.random.default_rng(seed)
        t, k, eta = _draw_t_k_eta(int(samples), ranges, rng)
        k = np.where(k == 0, 1.0, k)
        xi = _draw_partner(eta, ranges, rng)
    else:
        t, k, eta, xi = (np.asarray(a, dtype=float) for a in samples)
    keep = (eta != xi) & (k != 0)
    t, k, eta, xi = t[keep], k[keep], eta[keep], xi[keep]
    lhs = np.abs(
        multiplier(t, k, eta, iota) * (1 + k**2 + eta**2) ** (s / 2)
        - multiplier(t, k, xi, iota) * (1 + k**2 + xi**2) ** (s / 2)
    )
    d = np.abs(eta - xi)
    denom = d * ((1 + d**2) ** (s / 2) + (1 + k**2 + xi**2) ** (s / 2))
    return float(np.max(lhs * np.abs(k) / denom)) if lhs.size else 0.0
