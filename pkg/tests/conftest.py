import numpy as np
import pytest

from pksns.spectral import SpectralField, make_grid


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid():
    return make_grid(32, 64, 8 * np.pi)


def random_field(grid, rng, frame="sheared", time=0.0, smooth=True):
    """Random real field, optionally restricted to the dealiased shell."""
    f = SpectralField.from_physical(grid, rng.standard_normal((grid.Nx, grid.Ny)), frame, time)
    if smooth:
        f = f.with_coeffs(f.coeffs * grid.dealias_mask)
    return f


def is_hermitian(c, atol=1e-14):
    nx, ny = c.shape
    flipped = np.conj(c[(-np.arange(nx)) % nx][:, (-np.arange(ny)) % ny])
    return np.allclose(c, flipped, rtol=0, atol=atol * max(1.0, np.abs(c).max()))


# one line per acceptance criterion, printed after the run
_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(number: int, ok: bool, detail: str) -> bool:
        _CRITERIA[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_CRITERIA[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[n])
