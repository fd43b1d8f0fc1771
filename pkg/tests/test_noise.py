import math

import numpy as np
import pytest
from scipy import integrate
from scipy.special import gamma as G

from levyspde import rng
from levyspde.errors import MomentGateError
from levyspde.grid import SimGrid
from levyspde.noise import (
    CompoundPoisson, Gamma, TruncatedStable, VarianceGamma, empirical_cell_moments, load_noise_binary,
    measure_from_dict, measure_to_dict, moment_mp, rosenthal_bound, rosenthal_constant, sample_cells,
    sample_stochastic_integral, sample_white_noise, small_jump_variance, step_increments,
)

MEASURES = [
    Gamma(2.0, 3.0),
    VarianceGamma(0.5, 1.0, 0.5),
    TruncatedStable(1.2, 1.0, 1e-2),
    CompoundPoisson(3.0, (-1.0, 2.0), (0.7, 0.3)),
]


def _levy_density_moment(density, p, lo, hi):
    v, _ = integrate.quad(lambda z: abs(z) ** p * density(z), lo, hi, limit=400, epsrel=1e-11)
    return v


def test_gamma_moments_closed_form():
    m = Gamma(2.0, 3.0)
    for p in (2, 3, 4, 2.5):
        assert moment_mp(m, p) == pytest.approx(2.0 * G(p) / 3.0**p, rel=1e-14)
    assert moment_mp(m, 4) == pytest.approx(12 / 81, rel=1e-14)


def test_gamma_moment_matches_levy_density():
    m = Gamma(1.5, 2.0)
    dens = lambda z: m.alpha / z * math.exp(-m.beta * z)
    for p in (2, 3.5):
        assert moment_mp(m, p) == pytest.approx(_levy_density_moment(dens, p, 0, np.inf), rel=1e-9)


def test_variance_gamma_second_moment():
    for th, s, nu in [(1, 1, 1), (2, 0.5, 0.5), (-0.3, 2.0, 0.1)]:
        assert moment_mp(VarianceGamma(th, s, nu), 2) == pytest.approx(th * th * nu + s * s, rel=1e-13)


def test_variance_gamma_moment_matches_levy_density():
    m = VarianceGamma(0.7, 1.1, 0.4)
    up = lambda z: math.exp(-z / (m.mu_p * m.nu)) / (m.nu * z)
    down = lambda z: math.exp(-z / (m.mu_n * m.nu)) / (m.nu * z)
    for p in (2, 4):
        ref = _levy_density_moment(up, p, 0, np.inf) + _levy_density_moment(down, p, 0, np.inf)
        assert moment_mp(m, p) == pytest.approx(ref, rel=1e-9)


def test_truncated_stable_moments():
    m = TruncatedStable(1.2, 2.0)
    dens = lambda z: 0.5 * m.stable_index * abs(z) ** (-1 - m.stable_index)
    for p in (2, 3):
        ref = 2 * _levy_density_moment(dens, p, 0, 2.0)
        assert moment_mp(m, p) == pytest.approx(ref, rel=1e-9)
    assert moment_mp(m, 1.0) == math.inf
    assert small_jump_variance(m) > 0


def test_compound_poisson_moments():
    m = CompoundPoisson(3.0, (-1.0, 2.0), (0.7, 0.3))
    assert moment_mp(m, 2) == pytest.approx(3.0 * (0.7 + 0.3 * 4))
    assert moment_mp(m, 4) == pytest.approx(3.0 * (0.7 + 0.3 * 16))


@pytest.mark.parametrize("m", MEASURES, ids=lambda m: type(m).__name__)
def test_cells_are_centered_with_variance_m2(m):
    gen = rng.stream(5, 0, 0, rng.PROBE)
    vol = 0.3
    x = sample_cells(m, vol, 50_000, gen)
    target = moment_mp(m, 2) - small_jump_variance(m) if isinstance(m, TruncatedStable) else moment_mp(m, 2)
    se_mean = math.sqrt(moment_mp(m, 2) * vol / x.size)
    assert abs(x.mean()) < 5 * se_mean
    se_var = np.std(x * x, ddof=1) / math.sqrt(x.size)
    assert abs(np.mean(x * x) - target * vol) < 5 * se_var


def test_empirical_cell_moments_fourth_cumulant():
    chk = empirical_cell_moments(Gamma(1.0, 1.0), 400_000, 0.5, 3)
    assert abs(chk.m2_empirical - 1.0) < 5 * chk.m2_stderr
    assert abs(chk.m4_empirical - 6.0) < 5 * chk.m4_stderr


def test_step_increments_are_addressable():
    g = SimGrid(1, 4.0, 16, 0.1, 1.0)
    a = step_increments(Gamma(1, 1), g, (9, 2), 3)
    b = step_increments(Gamma(1, 1), g, (9, 2), 3)
    c = step_increments(Gamma(1, 1), g, (9, 2), 4)
    d = step_increments(Gamma(1, 1), g, (9, 3), 3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_white_noise_matches_step_increments_and_exports(tmp_path):
    g = SimGrid(2, 2.0, 8, 0.25, 1.0)
    nf = sample_white_noise(Gamma(1, 2), g, (4, 0))
    assert nf.increments.shape == (4, 8, 8)
    assert np.array_equal(nf.increments[2], step_increments(Gamma(1, 2), g, (4, 0), 2))
    nf.export(tmp_path / "noise")
    assert np.array_equal(load_noise_binary(tmp_path / "noise"), nf.increments)


def test_stochastic_integral_isometry():
    g = SimGrid(1, 2.0, 8, 0.25, 1.0)
    phi = lambda t, x: np.cos(x) * (1 + t)
    m = VarianceGamma(0.5, 1.0, 0.5)
    vals = np.array([sample_stochastic_integral(m, phi, g, (1, r)) for r in range(3000)])
    mids = (np.arange(g.steps) + 0.5) * g.dt
    ref = moment_mp(m, 2) * sum(float(np.sum(phi(t, g.axis()) ** 2)) * g.cell_volume for t in mids)
    se = np.std(vals**2, ddof=1) / math.sqrt(vals.size)
    assert abs(np.mean(vals**2) - ref) < 4 * se


def test_rosenthal_constant_and_gate():
    assert rosenthal_constant(2, 1.0, 1.0, 1.0) == 2.0
    assert rosenthal_constant(4, 2.0, 1.0, 2.0) == pytest.approx(8 * 16 * 4.0)
    with pytest.raises(MomentGateError):
        rosenthal_constant(4, 1.0, math.inf, 1.0)
    assert rosenthal_bound(2, 1.0, 1.0, 1.0, 3.0, 5.0) == pytest.approx(2.0 * (3.0 + 5.0))


@pytest.mark.parametrize("m", MEASURES, ids=lambda m: type(m).__name__)
def test_measure_dict_roundtrip(m):
    assert measure_from_dict(measure_to_dict(m)) == m


def test_invalid_measures_rejected():
    with pytest.raises(ValueError):
        Gamma(-1, 1)
    with pytest.raises(ValueError):
        CompoundPoisson(1.0, (1.0,), (0.5,))
    with pytest.raises(ValueError):
        TruncatedStable(2.5)
