import math

import numpy as np
import pytest
from scipy import integrate

from levyspde.errors import ConfigError, GridMismatchError
from levyspde.grid import SimGrid
from levyspde.kernels import (
    BesselKernel, HeatKernel, PoissonKernel, ProductKernel, RieszKernel, bessel_family, bessel_family_quad,
    cell_averaged_kernel, convolve_direct, convolve_periodic, dalang_condition, dalang_integral, f_value,
    kernel_fourier_sq, kernel_from_dict, kernel_to_dict, kernel_value, kernel_value_fast, mu_density,
    spectral_amplitude,
)


def _fourier_1d(fn, xi):
    """F g(xi) = 2 int_0^inf g(x) cos(x xi) dx for even integrable g."""
    if xi == 0:
        v = integrate.quad(fn, 0, 1, limit=200)[0] + integrate.quad(fn, 1, np.inf, limit=200)[0]
        return 2 * v
    head = integrate.quad(lambda x: fn(x) * math.cos(x * xi), 0, 1, limit=400, epsabs=1e-13)[0]
    tail = integrate.quad(fn, 1, np.inf, weight="cos", wvar=xi, limlst=200)[0]
    return 2 * (head + tail)


@pytest.mark.parametrize("kernel", [HeatKernel(1.3), BesselKernel(3.0), PoissonKernel(0.8)],
                         ids=["heat", "bessel", "poisson"])
def test_fourier_square_matches_numeric_transform(kernel):
    fn = lambda x: float(kernel_value_fast(kernel, x))
    for xi in (0.0, 0.4, 1.7, 3.0):
        ft = _fourier_1d(fn, xi)
        assert ft * ft == pytest.approx(kernel_fourier_sq(kernel, xi), rel=1e-6, abs=1e-12)


@pytest.mark.parametrize("kernel", [HeatKernel(0.7), PoissonKernel(1.0), BesselKernel(3.0)],
                         ids=["heat", "poisson", "bessel"])
def test_self_convolution_is_doubled_order(kernel):
    k = lambda y: float(kernel_value_fast(kernel, y))
    for x in (0.0, 0.6, 2.0):
        v = integrate.quad(lambda y: k(y) * k(x - y), -np.inf, np.inf, limit=400, epsabs=1e-12)[0]
        assert v == pytest.approx(f_value(kernel, x), rel=1e-6)


def test_riesz_self_convolution_d1():
    kernel = RieszKernel(0.6)
    k = lambda y: float(kernel_value_fast(kernel, y))
    x = 1.0
    pts = [-50, 0, x, 50]
    v = sum(integrate.quad(lambda y: k(y) * k(x - y), a, b, limit=400)[0] for a, b in zip(pts, pts[1:]))
    tail = integrate.quad(lambda y: k(y) * (k(y - x) + k(y + x)), 50, np.inf, limit=400)[0]
    assert v + tail == pytest.approx(f_value(kernel, x), rel=1e-6)


def test_bessel_closed_form_matches_subordination():
    for d, a in [(1, 0.75), (2, 1.5), (3, 2.5)]:
        for r in (0.3, 1.0, 4.0):
            assert float(bessel_family(d, a, r)) == pytest.approx(bessel_family_quad(d, a, r), rel=1e-7)


def test_singular_kernels_are_infinite_at_origin():
    assert kernel_value(RieszKernel(0.5), 0.0) == math.inf
    assert math.isinf(kernel_fourier_sq(RieszKernel(0.5), 0.0))
    assert math.isfinite(kernel_value(BesselKernel(3.0), 0.0))


def test_product_kernel_factorizes():
    k = ProductKernel((HeatKernel(1.0), PoissonKernel(2.0)))
    x = np.array([0.3, -1.2])
    assert kernel_value(k, x) == pytest.approx(kernel_value(HeatKernel(1.0), 0.3) * kernel_value(PoissonKernel(2.0), -1.2))
    assert kernel_fourier_sq(k, x) == pytest.approx(math.exp(-0.09 / 2) * math.exp(-2 * 1.2))
    assert mu_density(k, x) == pytest.approx(kernel_fourier_sq(k, x) / (2 * math.pi) ** 2)


DALANG_TABLE = [
    (RieszKernel(0.9, 3), False), (RieszKernel(1.1, 3), True),
    (RieszKernel(1.9, 4), False), (RieszKernel(2.1, 4), True),
    (RieszKernel(0.1, 2), True), (RieszKernel(0.5, 1), True),
    (BesselKernel(0.9, 3), False), (BesselKernel(1.1, 3), True),
    (BesselKernel(0.2, 1), True), (HeatKernel(1.0, 3), True),
    (PoissonKernel(1.0, 2), True),
    (ProductKernel((RieszKernel(0.2), RieszKernel(0.2), RieszKernel(0.2))), False),
    (ProductKernel((RieszKernel(0.5), RieszKernel(0.5), RieszKernel(0.5))), True),
    (ProductKernel((RieszKernel(0.3), HeatKernel(1.0), HeatKernel(1.0))), True),
]


@pytest.mark.parametrize("kernel,holds", DALANG_TABLE, ids=lambda v: repr(v)[:40])
def test_dalang_truth_table(kernel, holds):
    assert dalang_condition(kernel).holds is holds


def test_dalang_integral_riesz_closed_form():
    # d=1: (1/pi) int_0^inf r^{-a} / (1 + r^2) dr = 1 / (2 cos(pi a / 2))
    a = 0.4
    assert dalang_integral(RieszKernel(a)) == pytest.approx(1 / (2 * math.cos(math.pi * a / 2)), rel=1e-8)


def test_dalang_integral_product_matches_direct():
    k = ProductKernel((PoissonKernel(1.0), RieszKernel(0.5)))
    f = lambda y, x: float(mu_density(k, np.array([x, y]))) / (1 + x * x + y * y)
    direct = 4 * integrate.dblquad(f, 0, np.inf, 0, np.inf, epsabs=1e-11)[0]
    assert dalang_integral(k) == pytest.approx(direct, rel=1e-5)


def _kernel_mass_on_cells(kernel, grid):
    return float(np.sum(cell_averaged_kernel(kernel, grid))) * grid.space_cell_volume


def test_cell_average_preserves_mass_for_heat():
    g = SimGrid(1, 8.0, 64, 1.0, 1.0)
    assert _kernel_mass_on_cells(HeatKernel(1.0), g) == pytest.approx(1.0, abs=1e-13)
    g2 = SimGrid(2, 6.0, 32, 1.0, 1.0)
    assert _kernel_mass_on_cells(HeatKernel(0.5, 2), g2) == pytest.approx(1.0, abs=1e-12)


def test_cell_average_of_singular_kernel_matches_cell_integral():
    k = RieszKernel(0.5)
    g = SimGrid(1, 4.0, 32, 1.0, 1.0)
    kbar = cell_averaged_kernel(k, g)
    h = g.dx / 2
    ref0 = integrate.quad(lambda x: float(kernel_value_fast(k, x)), -h, h, points=[0.0])[0] / g.dx
    assert kbar[0] == pytest.approx(ref0, rel=1e-10)
    ref3 = integrate.quad(lambda x: float(kernel_value_fast(k, x)), 3 * g.dx - h, 3 * g.dx + h)[0] / g.dx
    assert kbar[3] == pytest.approx(ref3, rel=1e-10)


@pytest.mark.parametrize("kernel", [HeatKernel(1.0), RieszKernel(0.5), BesselKernel(1.0), PoissonKernel(1.0)],
                         ids=["heat", "riesz", "bessel", "poisson"])
def test_periodic_convolution_matches_direct_sum_1d(kernel):
    g = SimGrid(1, 4.0, 32, 1.0, 1.0)
    field = np.random.default_rng(0).standard_normal(g.shape)
    assert np.max(np.abs(convolve_periodic(field, kernel, g) - convolve_direct(field, kernel, g))) < 1e-10


def test_periodic_convolution_matches_direct_sum_2d():
    g = SimGrid(2, 3.0, 8, 1.0, 1.0)
    field = np.random.default_rng(1).standard_normal(g.shape)
    for k in (HeatKernel(1.0, 2), BesselKernel(1.5, 2), ProductKernel((HeatKernel(1.0), RieszKernel(0.5)))):
        assert np.max(np.abs(convolve_periodic(field, k, g) - convolve_direct(field, k, g))) < 1e-10


def test_unit_spike_returns_cell_average():
    g = SimGrid(1, 4.0, 16, 1.0, 1.0)
    spike = np.zeros(g.shape)
    spike[g.origin_index()] = 1.0
    out = convolve_periodic(spike, PoissonKernel(1.0), g)
    kbar = cell_averaged_kernel(PoissonKernel(1.0), g)
    assert np.allclose(np.fft.ifftshift(out), kbar, atol=1e-14)


def test_grid_mismatch_is_rejected():
    g = SimGrid(1, 4.0, 16, 1.0, 1.0)
    with pytest.raises(GridMismatchError):
        convolve_periodic(np.zeros(8), HeatKernel(1.0), g)
    with pytest.raises(GridMismatchError):
        cell_averaged_kernel(HeatKernel(1.0, 2), g)


def test_spectral_amplitude_synthesizes_kernel():
    g = SimGrid(1, 20.0, 512, 1.0, 1.0)
    k = HeatKernel(1.0)
    samples = np.fft.irfft(spectral_amplitude(k, g), n=g.n) / g.dx
    x = np.fft.fftfreq(g.n, 1.0 / g.n) * g.dx
    assert np.allclose(samples, kernel_value_fast(k, x), atol=1e-12)


def test_riesz_zero_mode_uses_cell_average():
    g = SimGrid(1, 10.0, 64, 1.0, 1.0)
    amp = spectral_amplitude(RieszKernel(0.5), g)
    h = g.dxi / 2
    assert amp[0] ** 2 == pytest.approx(2 * h**0.5 / 0.5 / g.dxi, rel=1e-12)
    assert amp[3] ** 2 == pytest.approx((3 * g.dxi) ** -0.5)


def test_kernel_validation_and_roundtrip():
    with pytest.raises(ConfigError):
        RieszKernel(1.5, 1)
    with pytest.raises(ConfigError):
        ProductKernel((HeatKernel(1.0, 2),))
    for k in (HeatKernel(1.0, 2), RieszKernel(0.5), ProductKernel((BesselKernel(1.0), PoissonKernel(2.0)))):
        assert kernel_from_dict(kernel_to_dict(k)) == k
