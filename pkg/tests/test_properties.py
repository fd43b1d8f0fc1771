import math

import numpy as np
from hypothesis import given, settings, strategies as st

from levyspde import rng
from levyspde.bounds import fit_loglog
from levyspde.cli import csv_bytes
from levyspde.config import parse_config
from levyspde.grid import SimGrid
from levyspde.kernels import BesselKernel, HeatKernel, PoissonKernel, convolve_periodic
from levyspde.models import Nonlinearity
from levyspde.noise import CompoundPoisson, Gamma, VarianceGamma, moment_mp

seeds = st.integers(0, 2**64 - 1)
small = st.integers(0, 2**20)

GRID = SimGrid(1, 8.0, 32, 0.1, 1.0)
kernels = st.sampled_from([HeatKernel(1.0), BesselKernel(1.5), PoissonKernel(0.5)])


@given(seeds, small, small, st.integers(0, 3))
def test_streams_are_reproducible(seed, rep, step, purpose):
    a = rng.stream(seed, rep, step, purpose).standard_normal(4)
    b = rng.stream(seed, rep, step, purpose).standard_normal(4)
    assert np.array_equal(a, b)


@given(seeds, small, small)
def test_streams_differ_across_addresses(seed, rep, step):
    base = rng.stream(seed, rep, step).integers(0, 2**63, 2)
    assert not np.array_equal(base, rng.stream(seed, rep + 1, step).integers(0, 2**63, 2))
    assert not np.array_equal(base, rng.stream(seed, rep, step + 1).integers(0, 2**63, 2))


@given(st.integers(1, 3), st.floats(0.5, 50), st.sampled_from([2, 4, 16, 64]))
def test_grid_axis_layout(d, L, n):
    g = SimGrid(d, L, n, 0.1, 1.0)
    ax = g.axis()
    assert len(ax) == n and ax[0] == -L
    assert ax[g.origin_index()[0]] == 0.0
    assert math.isclose(g.space_cell_volume, g.dx**d)


@settings(max_examples=30, deadline=None)
@given(kernels, seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_convolution_is_linear(k, seed, a, b):
    gen = rng.stream(seed)
    f, g = gen.standard_normal((2, GRID.n))
    lhs = convolve_periodic(a * f + b * g, k, GRID)
    rhs = a * convolve_periodic(f, k, GRID) + b * convolve_periodic(g, k, GRID)
    assert np.allclose(lhs, rhs, atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(kernels, seeds, st.integers(-31, 31))
def test_convolution_commutes_with_shifts(k, seed, shift):
    f = rng.stream(seed).standard_normal(GRID.n)
    assert np.allclose(convolve_periodic(np.roll(f, shift), k, GRID),
                       np.roll(convolve_periodic(f, k, GRID), shift), atol=1e-10)


measures = st.one_of(
    st.builds(Gamma, st.floats(0.1, 5), st.floats(0.1, 5)),
    st.builds(VarianceGamma, theta=st.floats(-2, 2), sigma=st.floats(0.1, 3), nu=st.floats(0.1, 3)),
    st.builds(lambda r, v: CompoundPoisson(r, (v, -2 * v), (0.5, 0.5)), st.floats(0.1, 5), st.floats(0.1, 3)),
)


@given(measures, st.floats(2, 6), st.floats(2, 6))
def test_jump_moments_are_log_convex(m, p, q):
    mid = moment_mp(m, (p + q) / 2)
    assert math.log(mid) <= 0.5 * (math.log(moment_mp(m, p)) + math.log(moment_mp(m, q))) + 1e-9


nonlinearities = st.one_of(
    st.builds(lambda s: Nonlinearity("scaled-linear", (s,)), st.floats(-5, 5)),
    st.builds(lambda a, o: Nonlinearity("sin-bounded", (a, o)), st.floats(-3, 3), st.floats(-3, 3)),
    st.builds(lambda s, c: Nonlinearity("affine-clip", (s, c, -1.0, 2.0)), st.floats(-3, 3), st.floats(-1, 1)),
    st.just(Nonlinearity("identity")),
)


@given(nonlinearities, st.lists(st.floats(-100, 100), min_size=2, max_size=20))
def test_nonlinearity_respects_lipschitz_constant(f, xs):
    x = np.array(xs)
    y = np.roll(x, 1)
    assert np.all(np.abs(f(x) - f(y)) <= f.lipschitz * np.abs(x - y) * (1 + 1e-12) + 1e-12)


@given(nonlinearities)
def test_nonlinearity_dict_round_trip(f):
    from levyspde.models import nonlinearity_from_dict
    assert nonlinearity_from_dict(f.to_dict()) == f


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([("heat", 1.0), ("bessel", 1.5), ("poisson", 0.7)]),
       st.sampled_from([{"variant": "gamma", "alpha": 2.0, "beta": 3.0},
                        {"variant": "variance-gamma", "nu": 0.5, "theta": 1.0, "sigma": 0.5}]),
       st.sampled_from([8, 16, 32]), st.integers(1, 10), st.lists(st.sampled_from([2.0, 3.0, 4.0]), min_size=1, max_size=3),
       seeds)
def test_config_round_trip(kernel, measure, n, steps, ps, seed):
    doc = {"schema_version": 1, "operator": {"kind": "heat", "d": 1},
           "kernel": {"variant": kernel[0], "alpha": kernel[1]}, "measure": measure,
           "grid": {"half_width": 4.0, "n": n, "dt": 0.05, "horizon": 0.05 * steps},
           "model": {"type": "anderson", "lambda": 0.5, "eta": 1.0},
           "analysis": {"p": ps}, "seed": seed}
    cfg = parse_config(doc, "moments")
    again = parse_config(cfg.to_dict(), "moments")
    assert again == cfg and again.digest() == cfg.digest()


@given(st.lists(st.floats(allow_nan=False), min_size=1, max_size=8))
def test_csv_cells_round_trip_floats(xs):
    line = csv_bytes(["x"] * len(xs), [xs]).decode().splitlines()[1]
    assert [float(c) for c in line.split(",")] == xs


@given(st.floats(-3, 3), st.floats(0.1, 10), st.lists(st.floats(0.01, 100), min_size=3, max_size=10, unique=True))
def test_loglog_fit_recovers_power_laws(k, c, ts):
    slope, se = fit_loglog(ts, [c * t**k for t in ts])
    assert math.isclose(slope, k, abs_tol=1e-9) and se < 1e-6
