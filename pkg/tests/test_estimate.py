import math

import numpy as np
import pytest

from levyspde.bounds import m_p
from levyspde.errors import BlowUpError, GridMismatchError
from levyspde.estimate import (
    MomentReport, SimulationConfig, _fsum_mean, compare_bound, lyapunov_estimate, mc_moments,
)
from levyspde.green import OperatorSpec
from levyspde.grid import SimGrid
from levyspde.kernels import HeatKernel
from levyspde.models import ZERO, Nonlinearity, scaled
from levyspde.noise import Gamma

HEAT = OperatorSpec("heat", 1)
K = HeatKernel(1.0)
G11 = Gamma(1.0, 1.0)


def linear_cfg(n=64, half=8.0, dt=0.02, horizon=0.4):
    return SimulationConfig.linear(HEAT, K, G11, SimGrid(1, half, n, dt, horizon))


def synthetic_report(times, values, p=2.0):
    v = np.asarray(values, dtype=float)[:, None]
    return MomentReport(list(times), [p], v, np.full_like(v, 0.01), 10, 1, np.full_like(v, 10.0))


def test_zero_sigma_gives_eta_power_exactly():
    cfg = SimulationConfig(HEAT, K, G11, SimGrid(1, 8.0, 32, 0.05, 0.5), ZERO, ZERO, -1.7)
    rep = mc_moments(cfg, [2, 3.5], [0.1, 0.5], 8, seed=1)
    assert np.array_equal(rep.estimates, np.array([[1.7**2, 1.7**3.5]] * 2))
    assert np.all(rep.stderr == 0)


def test_linear_second_moment_matches_quadrature():
    cfg = linear_cfg()
    rep = mc_moments(cfg, [2], [0.2, 0.4], 600, seed=5)
    for t in (0.2, 0.4):
        est, se = rep.estimate(t, 2)
        assert abs(est - m_p(HEAT, K, t, 2)) < 3 * se
    assert rep.replicates == 600 and rep.probes == 16


def test_p2_entry_equals_direct_variance_of_samples():
    rep = mc_moments(linear_cfg(), [2], [0.4], 40, seed=2)
    assert rep.estimates[0, 0] == pytest.approx(np.mean(rep.replicate_values[:, 0, 0]), rel=1e-14)


def test_thread_count_does_not_change_results():
    cfg = linear_cfg()
    a = mc_moments(cfg, [2, 4], [0.2, 0.4], 70, seed=9, threads=1, block=16)
    b = mc_moments(cfg, [2, 4], [0.2, 0.4], 70, seed=9, threads=3, block=16)
    assert np.array_equal(a.estimates, b.estimates) and np.array_equal(a.stderr, b.stderr)


def test_replicate_order_invariance():
    rep = mc_moments(linear_cfg(), [2], [0.4], 50, seed=4)
    perm = np.random.default_rng(0).permutation(rep.replicates)
    shuffled = rep.replicate_values[perm].mean(axis=0)
    assert np.max(np.abs(shuffled - rep.estimates)) <= 1e-12 * np.max(np.abs(rep.estimates))
    exact = _fsum_mean(rep.replicate_values[perm], 0)
    assert np.array_equal(exact, rep.estimates)


@pytest.mark.slow
def test_doubling_replicates_shrinks_stderr_by_sqrt2():
    cfg = linear_cfg(n=32, half=6.0, dt=0.05, horizon=0.5)
    a = mc_moments(cfg, [2], [0.5], 1000, seed=21)
    b = mc_moments(cfg, [2], [0.5], 2000, seed=21)
    ratio = a.stderr[0, 0] / b.stderr[0, 0]
    assert ratio == pytest.approx(math.sqrt(2), rel=0.15)


def test_low_ess_is_flagged():
    rep = mc_moments(linear_cfg(), [2, 8], [0.4], 12, seed=3)
    assert (0.4, 8.0) in rep.low_ess
    assert np.all(rep.ess <= 12 + 1e-9)


def test_blow_up_of_every_replicate_raises():
    cfg = SimulationConfig(HEAT, K, G11, SimGrid(1, 8.0, 32, 0.05, 0.5), ZERO,
                           Nonlinearity("scaled-linear", (1e4,)), 1.0)
    with pytest.raises(BlowUpError):
        mc_moments(cfg, [2], [0.5], 4, seed=0)


def test_replicate_counts_validated():
    with pytest.raises(ValueError):
        mc_moments(linear_cfg(), [2], [0.4], 1, seed=0)
    with pytest.raises(GridMismatchError):
        mc_moments(linear_cfg(), [2], [0.33], 4, seed=0)


def test_lyapunov_slope_of_exact_exponential():
    ts = np.linspace(0, 6, 13)
    ly = lyapunov_estimate(synthetic_report(ts, 2.0 * np.exp(0.37 * ts)), 2.0)
    assert ly.slope == pytest.approx(0.37, abs=1e-10)
    assert ly.window == (4.0, 6.0) and ly.points == 5
    assert ly.label == "finite-horizon growth rate"


def test_lyapunov_rejects_bad_windows():
    ts = np.linspace(0, 3, 7)
    rep = synthetic_report(ts, np.exp(ts))
    with pytest.raises(ValueError):
        lyapunov_estimate(rep, 2.0, (2.5, 3.0))
    bad = synthetic_report(ts, np.r_[np.ones(5), 0.0, 1.0])
    with pytest.raises(ValueError):
        lyapunov_estimate(bad, 2.0, (1.0, 3.0))


def test_lyapunov_bootstrap_stderr_from_replicates():
    cfg = SimulationConfig.anderson(HEAT, K, G11, SimGrid(1, 8.0, 64, 0.05, 2.0), 0.5, 1.0)
    rep = mc_moments(cfg, [2], [1.0, 1.25, 1.5, 1.75, 2.0], 64, seed=8)
    ly = lyapunov_estimate(rep, 2.0, (1.0, 2.0))
    assert ly.stderr > 0 and math.isfinite(ly.slope)


def test_compare_bound_verdicts():
    ts = [0.5, 1.0, 1.5]
    rep = synthetic_report(ts, [1.0, 2.0, 3.0])
    vs, ok = compare_bound(rep, [(t, math.inf) for t in ts])
    assert ok and all(v.passed for v in vs)
    vs, ok = compare_bound(rep, [(t, 0.0) for t in ts])
    assert not ok and not any(v.passed for v in vs)
    # within 3 stderr counts as a pass
    _, ok = compare_bound(rep, [(0.5, 1.0 - 0.029)])
    assert ok
    with pytest.raises(GridMismatchError):
        compare_bound(rep, [(0.75, 1.0)])


def test_linear_heat_moments_below_linear_bound():
    from levyspde.bounds import linear_moment_bound
    cfg = linear_cfg()
    rep = mc_moments(cfg, [4], [0.2, 0.4], 200, seed=12)
    series = [(t, linear_moment_bound(HEAT, K, G11, 4, t)) for t in (0.2, 0.4)]
    _, ok = compare_bound(rep, series, 4)
    assert ok


def test_anderson_config_helper():
    cfg = SimulationConfig.anderson(HEAT, K, G11, SimGrid(1, 8.0, 32, 0.05, 0.5), 1.5, 2.0)
    assert cfg.sigma == scaled(1.5) and cfg.eta == 2.0
