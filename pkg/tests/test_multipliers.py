import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pksns.multipliers import (
    DELTA_MAX,
    LemmaRanges,
    MultiplierSpec,
    apply_A_weight,
    commutator_constant,
    diffusive_weight,
    energy_weight,
    in_band,
    multiplier,
    multiplier_deta,
    multiplier_dt,
    orr_weight,
    verify_lemma_suite,
)
from pksns.spectral import SpectralField, make_grid

from oracles import fd_deta, fd_dt, mp_multiplier

PI = np.pi


def test_zero_mode_multiplier_is_pi_squared():
    t = np.linspace(0, 50, 7)
    assert np.allclose(multiplier(t, 0.0, 3.0, 0.1), PI**2)


def test_critical_time_value():
    # at t = eta/k both arctans vanish
    assert multiplier(2.0, 3.0, 6.0, 0.1) == pytest.approx(PI**2)


def test_band_edges():
    assert in_band(10, 0.01) and not in_band(11, 0.01)
    assert not in_band(0, 0.01)
    assert in_band(-1, 1.0) and not in_band(2, 1.0)
    # off band the iota weight is pi whatever t is
    assert diffusive_weight(123.0, 2.0, -5.0, 1.0) == PI


def test_limits_in_time():
    # early times: a -> -inf, weights -> 3pi/2; late: a -> +inf, weights -> pi/2
    assert orr_weight(0.0, 1.0, 1e12) == pytest.approx(1.5 * PI)
    assert orr_weight(1e12, 1.0, 0.0) == pytest.approx(0.5 * PI)


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0, 200), k=st.integers(-64, 64), eta=st.floats(-256, 256),
       iota=st.sampled_from([1.0, 0.1, 0.01]))
def test_bounds_and_monotonicity(t, k, eta, iota):
    m = multiplier(t, float(k), eta, iota)
    assert PI**2 / 4 * (1 - 1e-12) <= m <= 9 * PI**2 / 4 * (1 + 1e-12)
    assert multiplier_dt(t, float(k), eta, iota) <= 0.0


@pytest.mark.parametrize("iota", [1.0, 0.1, 0.01])
def test_derivatives_match_multiprecision_differences(iota):
    rng = np.random.default_rng(7)
    for _ in range(40):
        t = rng.uniform(0, 40)
        k = float(rng.integers(1, 12) * rng.choice([-1, 1]))
        eta = k * (t + rng.normal(0, 2))
        for ana, ref in ((multiplier_dt(t, k, eta, iota), fd_dt(t, k, eta, iota)),
                         (multiplier_deta(t, k, eta, iota), fd_deta(t, k, eta, iota))):
            assert ana == pytest.approx(ref, rel=1e-6, abs=1e-14)


def test_vectorised_matches_scalar_oracle():
    rng = np.random.default_rng(3)
    t = rng.uniform(0, 20, 30)
    k = rng.integers(-8, 9, 30).astype(float)
    eta = rng.uniform(-30, 30, 30)
    vec = multiplier(t, k, eta, 0.1)
    ref = [float(mp_multiplier(*x, 0.1)) for x in zip(t, k, eta)]
    assert np.allclose(vec, ref, rtol=1e-14)


def test_energy_weight_uses_kappa_in_exponential():
    nu_spec = MultiplierSpec(iota=1.0, kappa=0.01, s=0)
    kap_spec = MultiplierSpec(iota=0.01, kappa=0.01, s=0)
    t, k, eta = 5.0, 3.0, 2.0
    g_nu = energy_weight(t, k, eta, nu_spec) / multiplier(t, k, eta, 1.0)
    g_ka = energy_weight(t, k, eta, kap_spec) / multiplier(t, k, eta, 0.01)
    assert g_nu == pytest.approx(g_ka)
    assert g_nu == pytest.approx(np.exp(DELTA_MAX * 0.01 ** (1 / 3) * 3 ** (2 / 3) * 5.0))


def test_energy_weight_sobolev_factor():
    spec = MultiplierSpec(1.0, 1.0, delta=0.0, s=4)
    assert energy_weight(0.0, 0.0, 2.0, spec) == pytest.approx(PI**2 * 25)


def test_apply_A_weight():
    g = make_grid(16, 32, 4 * PI)
    spec = MultiplierSpec(0.1, 0.1, s=2)
    f = SpectralField.from_physical(g, np.cos(g.Z) + np.sin(2 * g.Y))
    out = apply_A_weight(f, spec, 3.0)
    assert np.allclose(out.coeffs, f.coeffs * energy_weight(3.0, g.K, g.ETA, spec))


@pytest.mark.parametrize(
    "kw",
    [dict(iota=0.0, kappa=0.1), dict(iota=1.5, kappa=0.1), dict(iota=0.1, kappa=0.5),
     dict(iota=0.1, kappa=0.1, delta=0.01), dict(iota=0.1, kappa=0.1, s=-1)],
)
def test_spec_validation(kw):
    with pytest.raises(ValueError):
        MultiplierSpec(**kw)


def test_lemma_suite_small_run_is_clean():
    report = verify_lemma_suite(5000, seed=3)
    ids = {c.inequality_id for c in report.checks}
    assert ids == {"M_1", "M_bound", "M_property_common_dot_M", "M_property_common_pa_eta",
                   "M_5", "M_property_ED"}
    assert report.passed, [c for c in report.checks if c.violations]
    for c in report.checks:
        assert c.worst_margin >= -1e-9


def test_literal_off_band_claim_is_reported_as_failing():
    # M = pi^2 for every k off the band would need the Orr weight frozen too
    report = verify_lemma_suite(2000, iotas=(0.01,), seed=1, literal_m1=True)
    literal = report.by_id("M_1_literal")[0]
    assert literal.violations > 0
    assert report.by_id("M_1")[0].violations == 0


def test_report_json_schema():
    data = json.loads(verify_lemma_suite(500, iotas=(1.0,)).to_json())
    assert data["rel_slack"] == 1e-9
    for c in data["checks"]:
        assert set(c) == {"inequality_id", "iota", "samples", "violations", "worst_margin"}


def test_suite_is_reproducible():
    a = verify_lemma_suite(1000, seed=11).to_json()
    b = verify_lemma_suite(1000, seed=11).to_json()
    assert a == b


def test_commutator_constant_explicit_samples():
    t = np.array([1.0, 1.0])
    k = np.array([1.0, 2.0])
    eta = np.array([0.0, 1.0])
    xi = np.array([1.0, 1.0])  # second pair has eta == xi and is skipped
    c = commutator_constant((t, k, eta, xi), s=2, iota=0.1)
    m0 = multiplier(1.0, 1.0, 0.0, 0.1) * 2.0
    m1 = multiplier(1.0, 1.0, 1.0, 0.1) * 3.0
    assert c == pytest.approx(abs(m0 - m1) / (2.0 + 3.0))


def test_commutator_constant_is_finite():
    c = commutator_constant(20_000, s=2, ranges=LemmaRanges(50, 16, 64))
    assert 0 < c < np.inf
