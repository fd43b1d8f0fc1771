"""Levy measures, their moments, and sampling of centered Levy white noise.

A finite-variance Levy white noise L assigns to each space-time cell A a
centered, infinitely divisible variable with Var L(A) = m_2 |A|, where
m_p = int |z|^p nu(dz). Increments over disjoint cells are independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.special import gamma as gamma_fn

from . import rng as _rng
from .errors import FiniteVarianceError, MomentGateError
from .grid import SimGrid


@dataclass(frozen=True)
class Gamma:
    """nu(dz) = alpha z^{-1} e^{-beta z} dz on z > 0."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("Gamma measure needs alpha > 0 and beta > 0")


@dataclass(frozen=True)
class VarianceGamma:
    """Difference of two independent gamma noises, shifted to mean zero.

    theta is the drift of the uncentered noise X, sigma its Brownian scale
    and nu the variance rate of the subordinator.
    """

    theta: float
    sigma: float
    nu: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.nu > 0):
            raise ValueError("VarianceGamma needs sigma > 0 and nu > 0")

    @property
    def _root(self) -> float:
        return 0.5 * math.sqrt(self.theta**2 + 2.0 * self.sigma**2 / self.nu)

    @property
    def mu_p(self) -> float:
        return self._root + 0.5 * self.theta

    @property
    def mu_n(self) -> float:
        return self._root - 0.5 * self.theta

    @property
    def nu_p(self) -> float:
        return self.mu_p**2 * self.nu

    @property
    def nu_n(self) -> float:
        return self.mu_n**2 * self.nu


@dataclass(frozen=True)
class TruncatedStable:
    """Symmetric stable-like measure (s/2)|z|^{-1-s} dz restricted to |z| <= cutoff.

    Sampling keeps only jumps with |z| >= epsilon; the dropped variance is
    reported by `small_jump_variance`.
    """

    stable_index: float
    cutoff: float = 1.0
    epsilon: float = 1e-3

    def __post_init__(self):
        if not 0 < self.stable_index < 2:
            raise ValueError("stable_index must lie in (0, 2)")
        if not (self.cutoff > 0 and 0 < self.epsilon < self.cutoff):
            raise ValueError("need 0 < epsilon < cutoff")


@dataclass(frozen=True)
class CompoundPoisson:
    """nu = rate * (discrete jump law on `values` with weights `probs`)."""

    rate: float
    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if len(self.values) != len(self.probs) or not self.values:
            raise ValueError("values and probs must be nonempty and aligned")
        if any(v == 0 for v in self.values):
            raise ValueError("jump values must be nonzero")
        if any(q < 0 for q in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probs must be a probability vector")


LevyMeasureSpec = Union[Gamma, VarianceGamma, TruncatedStable, CompoundPoisson]


def moment_mp(measure: LevyMeasureSpec, p: float) -> float:
    """m_p = int |z|^p nu(dz); +inf when the integral diverges."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    if isinstance(measure, Gamma):
        if p == 0:
            return math.inf
        return measure.alpha * gamma_fn(p) / measure.beta**p
    if isinstance(measure, VarianceGamma):
        if p == 0:
            return math.inf
        nu = measure.nu
        # each side is a gamma measure with shape 1/nu and scale mu*nu
        return gamma_fn(p) / nu * ((measure.mu_p * nu) ** p + (measure.mu_n * nu) ** p)
    if isinstance(measure, TruncatedStable):
        s = measure.stable_index
        if p <= s:
            return math.inf
        return s * measure.cutoff ** (p - s) / (p - s)
    if isinstance(measure, CompoundPoisson):
        v = np.abs(np.asarray(measure.values, dtype=float))
        return float(measure.rate * np.dot(measure.probs, v**p))
    raise TypeError(f"unknown measure {measure!r}")


def small_jump_variance(measure: LevyMeasureSpec) -> float:
    """Variance per unit volume that the sampler leaves out (0 for exact laws)."""
    if isinstance(measure, TruncatedStable):
        s = measure.stable_index
        return s * measure.epsilon ** (2 - s) / (2 - s)
    return 0.0


def require_finite_variance(measure: LevyMeasureSpec) -> float:
    m2 = moment_mp(measure, 2.0)
    if not (math.isfinite(m2) and m2 > 0):
        raise FiniteVarianceError(f"m_2 = {m2} for {measure!r}")
    return m2


def sample_cells(measure: LevyMeasureSpec, volume: float, size, gen: np.random.Generator) -> np.ndarray:
    """Independent centered increments L(A) for cells of common volume |A|."""
    if isinstance(measure, Gamma):
        shape = measure.alpha * volume
        return gen.gamma(shape, 1.0 / measure.beta, size=size) - shape / measure.beta
    if isinstance(measure, VarianceGamma):
        nu = measure.nu
        up = gen.gamma(volume / nu, measure.mu_p * nu, size=size)
        down = gen.gamma(volume / nu, measure.mu_n * nu, size=size)
        return up - down - measure.theta * volume
    if isinstance(measure, TruncatedStable):
        return _truncated_stable_cells(measure, volume, size, gen)
    if isinstance(measure, CompoundPoisson):
        return _compound_poisson_cells(measure, volume, size, gen)
    raise TypeError(f"unknown measure {measure!r}")


def _truncated_stable_cells(m: TruncatedStable, volume, size, gen):
    s, eps, c = m.stable_index, m.epsilon, m.cutoff
    lo, hi = eps ** (-s), c ** (-s)
    intensity = lo - hi  # nu({eps <= |z| <= c})
    ncell = int(np.prod(size))
    counts = gen.poisson(intensity * volume, size=ncell)
    total = int(counts.sum())
    u = gen.random(total)
    mags = (lo - u * intensity) ** (-1.0 / s)
    signs = np.where(gen.random(total) < 0.5, -1.0, 1.0)
    owner = np.repeat(np.arange(ncell), counts)
    # symmetric measure: the compensator vanishes
    out = np.bincount(owner, weights=signs * mags, minlength=ncell)
    return out.reshape(size)


def _compound_poisson_cells(m: CompoundPoisson, volume, size, gen):
    z = np.asarray(m.values, dtype=float)
    lam = m.rate * np.asarray(m.probs, dtype=float) * volume
    ncell = int(np.prod(size))
    # thinning: the count of each jump size is an independent Poisson variable
    counts = gen.poisson(lam, size=(ncell, z.size))
    out = counts @ z - float(lam @ z)
    return out.reshape(size)


def step_increments(measure: LevyMeasureSpec, grid: SimGrid, seed_key: tuple[int, int], step: int) -> np.ndarray:
    """Noise increments of all spatial cells in time slab [t_step, t_step + dt)."""
    seed, replicate = seed_key
    gen = _rng.stream(seed, replicate, step, _rng.NOISE)
    return sample_cells(measure, grid.cell_volume, grid.shape, gen)


@dataclass(frozen=True)
class NoiseField:
    grid: SimGrid
    increments: np.ndarray = field(repr=False)  # shape (K,) + grid.shape
    seed_key: tuple[int, int]
    measure: LevyMeasureSpec

    def export(self, path: str | Path) -> tuple[Path, Path]:
        """Write little-endian float64 row-major data plus a JSON sidecar."""
        path = Path(path)
        data = path.with_suffix(".bin")
        side = path.with_suffix(".json")
        np.ascontiguousarray(self.increments, dtype="<f8").tofile(data)
        meta = {
            "format": "float64-le-row-major",
            "shape": list(self.increments.shape),
            "axes": ["step"] + [f"x{i}" for i in range(self.grid.d)],
            "grid": self.grid.to_dict(),
            "seed_key": list(self.seed_key),
            "measure": measure_to_dict(self.measure),
        }
        side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return data, side


def load_noise_binary(path: str | Path) -> np.ndarray:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    return np.fromfile(path.with_suffix(".bin"), dtype="<f8").reshape(meta["shape"])


def sample_white_noise(measure: LevyMeasureSpec, grid: SimGrid, seed_key: tuple[int, int]) -> NoiseField:
    require_finite_variance(measure)
    inc = np.stack([step_increments(measure, grid, seed_key, k) for k in range(grid.steps)])
    inc.setflags(write=False)
    return NoiseField(grid, inc, tuple(seed_key), measure)


def _integrand_on_cells(integrand, grid: SimGrid, step: int) -> np.ndarray:
    if callable(integrand):
        t = (step + 0.5) * grid.dt
        return np.broadcast_to(np.asarray(integrand(t, *grid.coords()), dtype=float), grid.shape)
    return np.asarray(integrand[step], dtype=float)


def sample_stochastic_integral(
    measure: LevyMeasureSpec,
    integrand: Callable | np.ndarray,
    grid: SimGrid,
    seed_key: tuple[int, int],
) -> float:
    """Riemann sum of Phi(cell center) * L(cell) over all cells.

    `integrand` is either an array of shape (K,) + grid.shape or a callable
    phi(t, x_1, ..., x_d) evaluated at time midpoints and spatial nodes.
    """
    require_finite_variance(measure)
    parts = []
    for k in range(grid.steps):
        phi = _integrand_on_cells(integrand, grid, k)
        if not phi.any():
            parts.append(0.0)
            continue
        parts.append(float(np.sum(phi * step_increments(measure, grid, seed_key, k))))
    return math.fsum(parts)


def rosenthal_constant(p: float, m2: float, mp: float, Bp: float) -> float:
    """C_p = 2^{p-1} B_p^p max(m_2^{p/2}, m_p)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    if not math.isfinite(mp):
        raise MomentGateError(f"m_p is infinite for p={p}")
    return 2.0 ** (p - 1) * Bp**p * max(m2 ** (p / 2), mp)


def rosenthal_bound(p: float, m2: float, mp: float, Bp: float, l2_norm_sq: float, lp_norm_p: float) -> float:
    return rosenthal_constant(p, m2, mp, Bp) * (l2_norm_sq ** (p / 2) + lp_norm_p)


def default_bp(p: float) -> float:
    return 2.0 * p


def measure_to_dict(m: LevyMeasureSpec) -> dict:
    if isinstance(m, Gamma):
        return {"variant": "gamma", "alpha": m.alpha, "beta": m.beta}
    if isinstance(m, VarianceGamma):
        return {"variant": "variance-gamma", "theta": m.theta, "sigma": m.sigma, "nu": m.nu}
    if isinstance(m, TruncatedStable):
        return {"variant": "truncated-stable", "stable_index": m.stable_index,
                "cutoff": m.cutoff, "epsilon": m.epsilon}
    if isinstance(m, CompoundPoisson):
        return {"variant": "compound-poisson", "rate": m.rate,
                "values": list(m.values), "probs": list(m.probs)}
    raise TypeError(m)


def measure_from_dict(d: dict) -> LevyMeasureSpec:
    d = dict(d)
    kind = d.pop("variant")
    if kind == "gamma":
        return Gamma(**d)
    if kind == "variance-gamma":
        return VarianceGamma(**d)
    if kind == "truncated-stable":
        return TruncatedStable(**d)
    if kind == "compound-poisson":
        return CompoundPoisson(d["rate"], tuple(d["values"]), tuple(d["probs"]))
    raise ValueError(f"unknown measure variant {kind!r}")


@dataclass(frozen=True)
class CellMomentCheck:
    cells: int
    volume: float
    m2_empirical: float
    m2_stderr: float
    m4_empirical: float
    m4_stderr: float
    mean_empirical: float


def empirical_cell_moments(measure: LevyMeasureSpec, cells: int, volume: float, seed: int,
                           chunk: int = 1 << 18) -> CellMomentCheck:
    """Estimate m_2 and m_4 from iid cells: Var L(A) = m_2|A|, kappa_4 L(A) = m_4|A|."""
    parts = []
    for c, start in enumerate(range(0, cells, chunk)):
        gen = _rng.stream(seed, c, 0, _rng.PROBE)
        parts.append(sample_cells(measure, volume, min(chunk, cells - start), gen))
    x = np.concatenate(parts)
    n = x.size
    mean = float(np.mean(x))
    x2 = x * x
    s2 = float(np.mean(x2))
    s4 = float(np.mean(x2 * x2))
    # the law is centered, so raw moments estimate the central ones
    k4 = s4 - 3.0 * s2 * s2
    se2 = float(np.std(x2, ddof=1)) / math.sqrt(n)
    # delta method for s4 - 3 s2^2
    g = x2 * x2 - 6.0 * s2 * x2
    se4 = float(np.std(g, ddof=1)) / math.sqrt(n)
    return CellMomentCheck(n, volume, s2 / volume, se2 / volume, k4 / volume, se4 / volume, mean)
