"""Independent reference implementations used by the tests."""

import mpmath as mp
import numpy as np


def mp_multiplier(t, k, eta, iota):
    """The ghost multiplier written out directly in multiprecision."""
    t, k, eta, iota = (mp.mpf(x) for x in (t, k, eta, iota))
    if k == 0:
        return mp.pi**2
    a = t - eta / k
    w_orr = mp.pi - mp.atan(a)
    if k * k * iota <= 1 + mp.mpf("1e-12"):
        w_dif = mp.pi - mp.atan(mp.cbrt(iota) * mp.cbrt(k * k) * a)
    else:
        w_dif = mp.pi
    return w_dif * w_orr


def central_difference(fun, x, h):
    return (fun(x + h) - fun(x - h)) / (2 * h)


def fd_dt(t, k, eta, iota, h=mp.mpf("1e-8")):
    with mp.workdps(50):
        return float(central_difference(lambda s: mp_multiplier(s, k, eta, iota), mp.mpf(t), h))


def fd_deta(t, k, eta, iota, h=mp.mpf("1e-8")):
    with mp.workdps(50):
        return float(central_difference(lambda e: mp_multiplier(t, k, e, iota), mp.mpf(eta), h))


def propagator_integral(k, eta, t0, t1):
    """int_t0^t1 k^2 + (eta - k s)^2 ds by adaptive quadrature."""
    with mp.workdps(30):
        return float(mp.quad(lambda s: k**2 + (eta - k * s) ** 2, [t0, t1]))


def linear_exact_factor(K, ETA, iota, t):
    """exp(-iota * [(k^2 + eta^2) t - eta k t^2 + k^2 t^3 / 3]), the expanded polynomial."""
    return np.exp(-iota * ((K**2 + ETA**2) * t - ETA * K * t**2 + K**2 * t**3 / 3))


def truncated_convolution(a, b, grid):
    """Coefficients of the product of two fields, by direct summation over the
    retained shell (no FFTs)."""
    ks = grid.kz.astype(int)
    js = grid.j_index.astype(int)
    out = np.zeros_like(a)
    ia = np.argwhere(np.abs(a) > 0)
    ib = np.argwhere(np.abs(b) > 0)
    for i1, j1 in ia:
        for i2, j2 in ib:
            k, l = ks[i1] + ks[i2], js[j1] + js[j2]
            if abs(k) <= grid.k_retained and abs(l) <= grid.j_retained:
                out[k % grid.Nx, l % grid.Ny] += a[i1, j1] * b[i2, j2]
    return out
