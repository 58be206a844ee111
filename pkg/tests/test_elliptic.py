import numpy as np
import pytest

from pksns.elliptic import (
    biot_savart,
    chemical_symbol,
    chemotaxis_flux,
    curl_L,
    divergence_L,
    solve_chemical,
    streamfunction_symbol,
)
from pksns.spectral import FrameError, SpectralField, make_grid

from conftest import random_field


def test_chemical_solve_of_single_mode():
    # (1 - Delta_L) C = N for N = cos(k z + eta y) gives C = N / (1 + k^2 + (eta - k t)^2)
    g = make_grid(32, 64, 8 * np.pi)
    eta = 5 * 2 * np.pi / g.Ly
    t = 1.3
    N = SpectralField.from_physical(g, np.cos(2 * g.Z + eta * g.Y), time=t)
    C = solve_chemical(N, t)
    expected = np.cos(2 * g.Z + eta * g.Y) / (1 + 4 + (eta - 2 * t) ** 2)
    assert np.allclose(C.physical(), expected, atol=1e-13)


def test_chemical_of_constant_is_constant(grid):
    N = SpectralField.from_physical(grid, np.full((grid.Nx, grid.Ny), 2.5))
    assert np.allclose(solve_chemical(N, 0.4).physical(), 2.5, atol=1e-13)


def test_symbols_at_origin(grid):
    assert chemical_symbol(grid, 3.0)[0, 0] == 1.0
    assert streamfunction_symbol(grid, 3.0)[0, 0] == 0.0


def test_zero_vorticity_gives_zero_velocity(grid):
    U = biot_savart(SpectralField.zeros(grid), 1.0)
    assert not U.u1.coeffs.any() and not U.u2.coeffs.any()


def test_z_independent_vorticity_has_no_vertical_velocity(grid, rng):
    W = random_field(grid, rng)
    c = np.zeros_like(W.coeffs)
    c[0] = W.coeffs[0]
    U = biot_savart(W.with_coeffs(c), 2.0)
    assert np.abs(U.u2.coeffs).max() == 0.0
    assert np.abs(U.u2.physical()).max() == 0.0


@pytest.mark.parametrize("t", [0.0, 0.9, 7.5])
def test_curl_of_velocity_recovers_vorticity(grid, rng, t):
    W = random_field(grid, rng, time=t)
    U = biot_savart(W, t)
    back = curl_L(U.u1, U.u2, t).coeffs
    target = W.coeffs.copy()
    target[0, 0] = 0.0
    err = np.abs(back - target).max() / np.abs(target).max()
    assert err <= 1e-12
    div = divergence_L(U.u1, U.u2, t).coeffs
    assert np.abs(div).max() <= 1e-14 * np.abs(target).max()


def test_velocity_of_shear_mode_in_physical_space():
    # Omega = cos(eta y) (k = 0): psi = -cos/eta^2, u1 = -d_y psi = -sin(eta y)/eta
    g = make_grid(16, 64, 8 * np.pi)
    eta = 3 * 2 * np.pi / g.Ly
    W = SpectralField.from_physical(g, np.cos(eta * g.Y))
    U = biot_savart(W, 0.0)
    assert np.allclose(U.u1.physical(), -np.sin(eta * g.Y) / eta, atol=1e-13)


def test_biot_savart_requires_sheared_frame(grid, rng):
    with pytest.raises(FrameError):
        biot_savart(random_field(grid, rng, frame="lab"), 0.0)


def test_chemotaxis_flux_checks_time(grid, rng):
    N = random_field(grid, rng, time=1.0)
    C = solve_chemical(N, 1.0)
    chemotaxis_flux(N, C, 1.0)
    with pytest.raises(FrameError):
        chemotaxis_flux(N, C, 2.0)


def test_chemotaxis_flux_pointwise():
    # N = 1 + a cos z: grad C is analytic, so the flux is a known product
    g = make_grid(32, 32, 4 * np.pi)
    a = 0.3
    N = SpectralField.from_physical(g, 1 + a * np.cos(g.Z))
    C = solve_chemical(N, 0.0)
    f1, f2 = chemotaxis_flux(N, C, 0.0)
    cz = -a * np.sin(g.Z) / 2
    assert np.allclose(f1.physical(), (1 + a * np.cos(g.Z)) * cz, atol=1e-13)
    assert np.allclose(f2.physical(), 0.0, atol=1e-14)
