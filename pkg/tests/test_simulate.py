import json
import math

import numpy as np
import pytest

from levyspde.bounds import m_p
from levyspde.errors import BlowUpError, DalangError, UnsupportedError
from levyspde.green import OperatorSpec
from levyspde.grid import SimGrid
from levyspde.kernels import BesselKernel, HeatKernel, RieszKernel
from levyspde.models import ONE, ZERO, Nonlinearity, scaled
from levyspde.noise import CompoundPoisson, Gamma, VarianceGamma
from levyspde.simulate import (
    Stepper, _run_block, linear_variance_discrete, picard_final, picard_validate, simulate_anderson,
    simulate_linear, simulate_nonlinear,
)

HEAT = OperatorSpec("heat", 1)
WAVE = OperatorSpec("wave", 1)
K = HeatKernel(1.0)
G11 = Gamma(1.0, 1.0)
GRID = SimGrid(1, 8.0, 64, 0.02, 0.4)


def test_blocks_equal_single_replicates_bitwise():
    rec = [5, 20]
    block, _ = _run_block(HEAT, K, G11, GRID, 3, list(range(6)), ONE, ZERO, 0.0, rec)
    for r in range(6):
        single, _ = _run_block(HEAT, K, G11, GRID, 3, [r], ONE, ZERO, 0.0, rec)
        assert np.array_equal(block[r], single[0])


def test_unit_sigma_is_eta_plus_linear_solution():
    lin = simulate_linear(HEAT, K, G11, GRID, (2, 1))
    nl = simulate_nonlinear(HEAT, K, G11, ONE, ZERO, 2.5, GRID, (2, 1))
    assert np.array_equal(nl.values, 2.5 + lin.values)


def test_anderson_is_scaled_linear_sigma():
    a = simulate_anderson(HEAT, K, G11, 0.7, 1.0, GRID, (2, 1))
    b = simulate_nonlinear(HEAT, K, G11, scaled(0.7), ZERO, 1.0, GRID, (2, 1))
    assert np.array_equal(a.values, b.values)


def test_zero_sigma_keeps_initial_value():
    z = simulate_nonlinear(HEAT, K, G11, ZERO, ZERO, 1.3, GRID, (2, 1))
    assert np.all(z.values == 1.3)


def test_constant_drift_adds_deterministic_growth():
    drift = Nonlinearity("constant", (0.5,))
    u = simulate_nonlinear(HEAT, K, G11, ZERO, drift, 0.0, GRID, (0, 0))
    assert np.allclose(u.values[-1], 0.5 * GRID.horizon, atol=1e-12)


def test_discrete_isometry_matches_quadrature():
    grid = SimGrid(1, 16.0, 256, 0.01, 1.0)
    for t in (0.25, 1.0):
        assert linear_variance_discrete(HEAT, K, 1.0, grid, t) == pytest.approx(m_p(HEAT, K, t, 2), rel=1e-4)


def test_wave_scheme_variance():
    grid = SimGrid(1, 16.0, 128, 0.01, 0.5)
    kernel = BesselKernel(2.0)
    disc = linear_variance_discrete(WAVE, kernel, 1.0, grid, 0.5)
    quad = m_p(WAVE, kernel, 0.5, 2)
    assert disc == pytest.approx(quad, rel=1e-3)
    vals, _ = _run_block(WAVE, kernel, G11, grid, 5, list(range(400)), ONE, ZERO, 0.0, [50])
    per = np.mean(vals[:, 0, ::4] ** 2, axis=1)
    assert abs(per.mean() - quad) < 4 * per.std(ddof=1) / math.sqrt(per.size)


def test_two_dimensional_heat_runs_and_matches_variance():
    grid = SimGrid(2, 6.0, 32, 0.02, 0.2)
    op, k = OperatorSpec("heat", 2), HeatKernel(1.0, 2)
    vals, _ = _run_block(op, k, G11, grid, 1, list(range(200)), ONE, ZERO, 0.0, [10])
    per = np.mean(vals[:, 0, ::4, ::4] ** 2, axis=(1, 2))
    ref = linear_variance_discrete(op, k, 1.0, grid, 0.2)
    assert abs(per.mean() - ref) < 4 * per.std(ddof=1) / math.sqrt(per.size)


def test_picard_iteration_converges_to_direct_scheme():
    grid = SimGrid(1, 8.0, 32, 0.05, 0.3)
    sigma = Nonlinearity("sin-bounded", (0.8, 1.0))
    b = Nonlinearity("affine-clip", (-0.5, 0.1, -1.0, 1.0))
    dists = picard_validate(HEAT, K, VarianceGamma(0.3, 1.0, 0.5), sigma, b, 0.2, grid, (4, 0), 7, replicates=3)
    assert dists[-1] < 1e-20 < dists[0]
    final = picard_final(HEAT, K, VarianceGamma(0.3, 1.0, 0.5), sigma, b, 0.2, grid, (4, 0), grid.steps + 1)
    direct = simulate_nonlinear(HEAT, K, VarianceGamma(0.3, 1.0, 0.5), sigma, b, 0.2, grid, (4, 0))
    assert np.max(np.abs(final - direct.values)) < 1e-12


def test_blow_up_is_detected():
    explosive = Nonlinearity("scaled-linear", (1e4,))
    with pytest.raises(BlowUpError) as e:
        simulate_nonlinear(HEAT, K, G11, ZERO, explosive, 1.0, GRID, (0, 0))
    assert e.value.step > 0


def test_dalang_gate_and_wave_dimension():
    grid3 = SimGrid(3, 4.0, 8, 0.1, 0.2)
    with pytest.raises(DalangError):
        simulate_linear(OperatorSpec("heat", 3), RieszKernel(0.5, 3), G11, grid3, (0, 0))
    out = simulate_linear(OperatorSpec("heat", 3), RieszKernel(0.5, 3), G11, grid3, (0, 0), allow_no_dalang=True)
    assert np.all(np.isfinite(out.values))
    with pytest.raises(UnsupportedError):
        Stepper(OperatorSpec("wave", 3), HeatKernel(1.0, 3), grid3)


def test_compound_poisson_noise_drives_scheme():
    cp = CompoundPoisson(2.0, (-1.0, 1.0), (0.5, 0.5))
    u = simulate_linear(HEAT, K, cp, GRID, (1, 0), record_steps=[GRID.steps])
    assert u.values.shape == (1, GRID.n) and np.any(u.values != 0)


def test_field_series_export(tmp_path):
    u = simulate_linear(HEAT, K, G11, GRID, (1, 0), record_steps=[0, 10, 20])
    u.export(tmp_path / "field")
    meta = json.loads((tmp_path / "field.json").read_text())
    data = np.fromfile(tmp_path / "field.bin", dtype="<f8").reshape(meta["shape"])
    assert np.array_equal(data, u.values)
    assert meta["times"] == pytest.approx([0.0, 0.2, 0.4])
