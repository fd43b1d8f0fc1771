"""Moment functionals and bounds for the linear and Anderson-type equations.

J_p(t) = ||G_t * kappa||_{L^p}^2 and M_p(t) = int_0^t J_p(s)^{p/2} ds drive
the p-th moment bounds of the linear solution. A_{beta,p} and beta* give
the exponential growth bound for Lipschitz sigma, Upsilon_a certifies a
positive lower bound on the second-moment growth rate, and the Anderson
second moment is evaluated through its chaos series.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from . import rng as _rng
from .errors import DalangError, DivergenceError, DomainError, MomentGateError, UnsupportedError
from .green import OperatorSpec, _fourier_radial, fourier_sq_radial, green_lp_norm_sq
from .grid import SimGrid
from .kernels import (
    BesselKernel, HeatKernel, KernelSpec, PoissonKernel, ProductKernel, RieszKernel,
    _one_d_gaussian_moment, _spectral_sq_radial, dalang_condition, length_scale, mu_density,
    sphere_area, spectral_amplitude,
)
from .noise import LevyMeasureSpec, moment_mp, require_finite_variance, rosenthal_constant

# ------------------------------------------------------------------ J_p


@dataclass(frozen=True)
class Resolution:
    """Spatial grid for FFT-based evaluation: N points per axis on [-L, L)^d."""

    n: int
    half_width: float

    def grid(self, d: int) -> SimGrid:
        return SimGrid(d, self.half_width, self.n, 1.0, 1.0)


def _next_pow2(x: float) -> int:
    return 1 << max(1, math.ceil(math.log2(max(x, 2))))


def auto_resolution(op: OperatorSpec, kernel: KernelSpec, t: float) -> Resolution:
    """Grid that resolves G_t * kappa: box and mesh both scale with the solution width."""
    d = op.d
    spread = math.sqrt(t) if op.is_heat else t
    ell = length_scale(kernel)
    if math.isfinite(ell):
        half = 10.0 * (spread + ell)
        finest = min(spread, ell)
    else:
        # power-law tails: a wide box, still proportional to the spread
        half = (400.0 if d == 1 else 60.0) * spread
        finest = spread
    cap = {1: 1 << 20, 2: 1 << 11, 3: 1 << 8}.get(d, 1 << 6)
    n = min(_next_pow2(2 * half / (finest / 24.0)), cap)
    return Resolution(n, half)


def _check_dalang(kernel: KernelSpec, allow_no_dalang: bool):
    if not allow_no_dalang and not dalang_condition(kernel).holds:
        raise DalangError(f"Dalang condition fails for {kernel!r}")


def j2_quadrature(op: OperatorSpec, kernel: KernelSpec, t: float) -> float:
    """J_2(t) = int |F G_t(xi)|^2 mu(d xi) by quadrature (+inf when it diverges)."""
    d = op.d
    if op.is_heat:
        if isinstance(kernel, HeatKernel):
            return (2 * math.pi) ** (-d) * (math.pi / (t + kernel.alpha / 2)) ** (d / 2)
        if isinstance(kernel, ProductKernel):
            return math.prod(_one_d_gaussian_moment(f, t) for f in kernel.factors)
        c = sphere_area(d) / (2 * math.pi) ** d
        g = lambda r: r ** (d - 1) * math.exp(-t * r * r) * float(_spectral_sq_radial(kernel, r))
        return c * _quad_halfline(g, scale=1 / math.sqrt(t))
    if isinstance(kernel, ProductKernel):
        raise UnsupportedError("wave operator with a product kernel needs a grid resolution")
    if not dalang_condition(kernel).holds:
        return math.inf
    c = sphere_area(d) / (2 * math.pi) ** d
    gk = lambda r: float(_spectral_sq_radial(kernel, r))
    R = max(40.0 / t, 10.0)
    # on [0, R] use the bounded form (t sinc)^2, beyond it split
    # sin^2 = (1 - cos 2tr)/2 and let QAWF handle the oscillation
    inner = lambda r: r ** (d - 1) * (t * np.sinc(t * r / np.pi)) ** 2 * gk(r)
    v0 = _quad_pieces(inner, 0.0, R, t)
    F = lambda r: r ** (d - 3) * gk(r)
    smooth, _ = integrate.quad(F, R, np.inf, limit=400, epsrel=1e-11, epsabs=0)
    osc, _ = integrate.quad(F, R, np.inf, weight="cos", wvar=2 * t, limlst=200)
    return c * (v0 + 0.5 * smooth - 0.5 * osc)


def _quad_halfline(g, scale: float) -> float:
    pts = [0.0, scale, 4 * scale, 16 * scale]
    tot = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        tot += integrate.quad(g, a, b, limit=200, epsrel=1e-12, epsabs=0)[0]
    tot += integrate.quad(g, pts[-1], np.inf, limit=200, epsrel=1e-12, epsabs=0)[0]
    return tot


def _quad_pieces(g, a: float, b: float, t: float) -> float:
    # break at multiples of the oscillation period so each piece is tame
    period = math.pi / t
    edges = np.arange(a, b, period * 4)
    edges = np.append(edges, b)
    return math.fsum(integrate.quad(g, lo, hi, limit=200, epsrel=1e-12, epsabs=0)[0]
                     for lo, hi in zip(edges[:-1], edges[1:]))


def j2_grid(op: OperatorSpec, kernel: KernelSpec, t: float, res: Resolution) -> float:
    """Discrete Plancherel sum of |F G_t|^2 |F kappa|^2 on the grid's frequency lattice.

    This is exactly the variance the simulation scheme produces per unit
    time at that resolution, and it grows without bound under refinement
    when the Dalang condition fails.
    """
    grid = res.grid(op.d)
    amp = spectral_amplitude(kernel, grid)
    g2 = fourier_sq_radial(op, t, grid.rfft_xi_norm())
    w = _rfft_weights(grid)
    return float(np.sum(w * g2 * amp * amp)) * grid.dxi**op.d / (2 * math.pi) ** op.d


def _rfft_weights(grid: SimGrid) -> np.ndarray:
    """Multiplicity of each rfft mode in the full spectrum."""
    m = grid.n // 2 + 1
    w = np.full(m, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    shape = [1] * grid.d
    shape[-1] = m
    return np.broadcast_to(w.reshape(shape), grid.rfft_xi_norm().shape)


def convolved_green(op: OperatorSpec, kernel: KernelSpec, t: float, res: Resolution) -> tuple[np.ndarray, SimGrid]:
    """Samples of (G_t * kappa)(x_j) on the periodic grid, via its Fourier data."""
    grid = res.grid(op.d)
    spec = _fourier_radial(op, t, grid.rfft_xi_norm()) * spectral_amplitude(kernel, grid)
    w = np.fft.irfftn(spec, s=grid.shape, axes=tuple(range(grid.d))) / grid.space_cell_volume
    return np.fft.fftshift(w), grid


def j_p_numeric(op: OperatorSpec, kernel: KernelSpec, t: float, p: float,
                resolution: Resolution | None = None, allow_no_dalang: bool = False) -> float:
    """J_p(t) = ||G_t * kappa||_{L^p}^2.

    p = 2 without a resolution uses quadrature of int |F G_t|^2 d mu. With
    a resolution, p = 2 is the discrete Plancherel sum. For p > 2 the
    convolution is synthesized on a grid and its p-norm summed.
    """
    if p < 2:
        raise ValueError("p must be >= 2")
    if t <= 0:
        raise ValueError("t must be positive")
    if kernel.d != op.d:
        raise ValueError("kernel and operator dimensions differ")
    _check_dalang(kernel, allow_no_dalang)
    if p == 2:
        if resolution is None:
            return j2_quadrature(op, kernel, t)
        return j2_grid(op, kernel, t, resolution)
    if not op.is_heat and op.d > 2:
        raise UnsupportedError("J_p for p > 2 needs a pointwise Green function (wave d <= 2)")
    res = resolution or auto_resolution(op, kernel, t)
    w, grid = convolved_green(op, kernel, t, res)
    return float(np.sum(np.abs(w) ** p) * grid.space_cell_volume) ** (2 / p)


# ------------------------------------------------------- explicit bounds


@dataclass(frozen=True)
class JpBound:
    exponent: float
    value: float  # +inf when the constant is not explicit
    note: str


def heat_kernel_ap_constant(d: int, alpha: float, p: float) -> float:
    """C with K_p = C * H_{d,alpha} solving K_p^{p/2} = kappa^{p/2} * kappa^{p/2}.

    Follows from H_{d,a}^q = (2 pi a)^{d(1-q)/2} q^{-d/2} H_{d,a/q} applied to
    kappa = H_{d,alpha/2} and to H_{d,alpha}, with q = p/2.
    """
    q = p / 2
    return (math.pi * alpha / 2) ** (d * (1 / q - 1) / 2) * q ** (-d / (2 * q))


def _is_heat_family(kernel: KernelSpec) -> bool:
    if isinstance(kernel, HeatKernel):
        return True
    return isinstance(kernel, ProductKernel) and all(isinstance(f, HeatKernel) for f in kernel.factors)


def _heat_family_constant(kernel: KernelSpec, p: float) -> float:
    if isinstance(kernel, HeatKernel):
        return heat_kernel_ap_constant(kernel.d, kernel.alpha, p)
    return math.prod(heat_kernel_ap_constant(1, f.alpha, p) for f in kernel.factors)


def jp_prime(op: OperatorSpec, kernel: KernelSpec, t: float, p: float) -> float:
    """Explicit J_p'(t) = (2 pi)^{-d} int |F G_t|^2 F K_p for Gaussian kernels."""
    return _heat_family_constant(kernel, p) * j2_quadrature(op, kernel, t)


def j_p_bound(op: OperatorSpec, kernel: KernelSpec, t: float, p: float) -> JpBound:
    d = op.d
    if _is_heat_family(kernel):
        exponent = 0.0 if op.is_heat else 2.0
        return JpBound(exponent, jp_prime(op, kernel, t, p), "explicit heat-kernel bound")
    if isinstance(kernel, RieszKernel):
        a = kernel.alpha
        if op.is_heat:
            return JpBound(d * (1 / p + a / (2 * d) - 1), math.inf, "constant unknown")
        if d == 1:
            return JpBound(2 / p + a, math.inf, "constant unknown")
        if d == 2 and p < 4 / (2 - a):
            return JpBound(4 / p + a - 2, math.inf, "constant unknown")
        raise UnsupportedError(f"no Riesz bound for wave d={d}, p={p}")
    if isinstance(kernel, BesselKernel):
        if op.is_heat:
            return JpBound(d * (1 - p) / p, math.inf, "constant unknown")
        if d == 1:
            return JpBound(2 / p, math.inf, "constant unknown")
        raise UnsupportedError(f"no Bessel bound for wave d={d}, p={p}")
    raise UnsupportedError(f"no J_p bound for {kernel!r}")


def green_norm_bound(op: OperatorSpec, t: float, p: float) -> float:
    """||G_t||_{L^p}^2, the t-dependent factor of the Bessel-kernel bound."""
    return green_lp_norm_sq(op, t, p)


# -------------------------------------------------------------- M_p


def admissible_p(op: OperatorSpec, kernel: KernelSpec, p: float) -> bool:
    """Whether M_p is finite according to the known range conditions."""
    if p == 2:
        return True
    d = op.d
    if isinstance(kernel, RieszKernel):
        a = kernel.alpha
        if op.is_heat:
            return p < (2 * d + 4) / (2 * d - a)
        if d == 2:
            return p < 4 / (2 - a)
        return d == 1
    if isinstance(kernel, BesselKernel):
        if op.is_heat:
            return p < 1 + 2 / d
        return d == 1
    return True


def _small_time_exponent(op: OperatorSpec, kernel: KernelSpec, p: float) -> float:
    """Best guess of e with J_p(s) ~ s^e as s -> 0, used only to shape quadrature."""
    if p == 2 or _is_heat_family(kernel):
        return 0.0 if op.is_heat else 2.0
    try:
        e = j_p_bound(op, kernel, 1.0, p).exponent
    except UnsupportedError:
        e = 0.0
    return e


def m_p(op: OperatorSpec, kernel: KernelSpec, t: float, p: float,
        resolution: Resolution | None = None, nodes: int = 32) -> float:
    """M_p(t) = int_0^t J_p(s)^{p/2} ds."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    if not admissible_p(op, kernel, p):
        raise DivergenceError(f"M_p diverges at s=0 for p={p} with {kernel!r}")
    if p == 2 and resolution is None:
        if op.is_heat and isinstance(kernel, HeatKernel):
            d, a = op.d, kernel.alpha / 2
            c = (2 * math.pi) ** (-d) * math.pi ** (d / 2)
            if d == 2:
                return c * math.log((t + a) / a)
            return c * ((t + a) ** (1 - d / 2) - a ** (1 - d / 2)) / (1 - d / 2)
        v, _ = integrate.quad(lambda s: j2_quadrature(op, kernel, s), 0, t, limit=200, epsrel=1e-10)
        return v
    e = p / 2 * _small_time_exponent(op, kernel, p)
    return _power_substituted_integral(lambda s: j_p_numeric(op, kernel, s, p, resolution) ** (p / 2),
                                       t, e, nodes)


def _power_substituted_integral(g, t: float, e: float, nodes: int) -> float:
    """int_0^t g(s) ds for g(s) ~ s^e near 0 (e > -1).

    With s = t u^k and k = 1/(1+e) the transformed integrand is bounded at
    u = 0, so Gauss-Legendre converges quickly. Nodes double until two
    successive rules agree to 1e-7.
    """
    k = 1.0 / (1.0 + e) if e > -1 else 1.0
    prev = None
    for m in (nodes, 2 * nodes, 4 * nodes):
        x, w = np.polynomial.legendre.leggauss(m)
        u = 0.5 * (x + 1)
        vals = np.array([g(t * ui**k) for ui in u])
        cur = float(np.sum(0.5 * w * vals * k * t * u ** (k - 1)))
        if prev is not None and abs(cur - prev) <= 1e-7 * abs(cur):
            return cur
        prev = cur
    return cur


# ------------------------------------------------------- linear bound


def linear_moment_bound(op: OperatorSpec, kernel: KernelSpec, measure: LevyMeasureSpec,
                        p: float, t: float, Bp: float | None = None,
                        variant: str = "t-free", resolution: Resolution | None = None) -> float:
    """Upper bound for E|v(t,x)|^p.

    variant "t-free":       C_p {M_2(t)^{p/2} + M_p(t)}
    variant "t-dependent":  C_p max(M_2(t)^{p/2-1}, 1) {M_2(t) + M_p(t)}
    """
    Bp = 2.0 * p if Bp is None else Bp
    m2 = require_finite_variance(measure)
    mp = moment_mp(measure, p)
    if not math.isfinite(mp):
        raise MomentGateError(f"m_{p} is infinite")
    cp = rosenthal_constant(p, m2, mp, Bp)
    M2 = m_p(op, kernel, t, 2.0)
    Mp = M2 if p == 2 else m_p(op, kernel, t, p, resolution)
    if variant == "t-free":
        return cp * (M2 ** (p / 2) + Mp)
    if variant == "t-dependent":
        return cp * max(M2 ** (p / 2 - 1), 1.0) * (M2 + Mp)
    raise ValueError(f"unknown variant {variant!r}")


# --------------------------------------------------- A_{beta,p} and beta*


@dataclass(frozen=True)
class ABeta:
    value: float  # quadrature plus the added tail bound
    tail_bound: float
    error: float

    def __float__(self):
        return self.value


def _jp_tail_envelope(op, kernel, p, T):
    """(M, poly) with J_p(t)^{p/2} <= M * (1 + t^2)^{poly} for t >= T, or None."""
    if op.is_heat:
        # ||G_t * kappa||_p is nonincreasing in t for the heat semigroup
        return (None, 0.0)
    if p == 2:
        return (2 * dalang_condition(kernel).value, 1.0)
    return None


def _laplace_piece(g, c: float, a: float, b: float) -> tuple[float, float]:
    v, err = integrate.quad(lambda s: math.exp(-c * s) * g(s), a, b, limit=400, epsrel=1e-10, epsabs=0)
    return v, err


def _weighted_integral(op, kernel, p, c, jp):
    """int_0^inf exp(-c s) jp(s) ds with a rigorous-in-form tail bound."""
    T = 1.0 + 40.0 / c
    head, e1 = _laplace_piece(jp, c, 0.0, 1.0)
    mid, e2 = _laplace_piece(jp, c, 1.0, T) if T > 1 else (0.0, 0.0)
    env = _jp_tail_envelope(op, kernel, p, T)
    if env is None:
        tail = math.nan
    elif env[0] is None:
        tail = jp(T) * math.exp(-c * T) / c
    else:
        M = env[0]
        # int_T^inf e^{-cs} (1 + s^2) ds
        tail = M * math.exp(-c * T) * ((1 + T * T) / c + 2 * T / c**2 + 2 / c**3)
    return head + mid, tail, e1 + e2


def a_beta_p(op: OperatorSpec, kernel: KernelSpec, beta: float, p: float,
             resolution: Resolution | None = None) -> ABeta:
    """A_{beta,p} = (int e^{-2 beta t} J_2)^{p/2} + int e^{-p beta t} J_p^{p/2}."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not admissible_p(op, kernel, p):
        return ABeta(math.inf, 0.0, 0.0)
    j2 = lambda s: j2_quadrature(op, kernel, s)
    v2, tail2, err2 = _weighted_integral(op, kernel, 2.0, 2 * beta, j2)
    if p == 2:
        first = v2 + (0.0 if math.isnan(tail2) else tail2)
        return ABeta(2 * first, 2 * tail2, 2 * err2)
    jp = _jp_cached(op, kernel, p, resolution)
    vp, tailp, errp = _weighted_integral(op, kernel, p, p * beta, lambda s: jp(s) ** (p / 2))
    b1 = v2 + (0.0 if math.isnan(tail2) else tail2)
    b2 = vp + (0.0 if math.isnan(tailp) else tailp)
    return ABeta(b1 ** (p / 2) + b2, tail2 + tailp, err2 + errp)


def _jp_cached(op, kernel, p, resolution):
    @lru_cache(maxsize=4096)
    def jp(s):
        return j_p_numeric(op, kernel, s, p, resolution)
    return jp


@dataclass(frozen=True)
class BetaStar:
    value: float
    flag: str  # "ok", "zero", "above-range", "below-range"
    search_range: tuple[float, float]

    def __float__(self):
        return self.value


def beta_star(op: OperatorSpec, kernel: KernelSpec, measure: LevyMeasureSpec, p: float,
              lip_sigma: float, Bp: float | None = None, beta_range=(1e-6, 1e6), steps: int = 60,
              resolution: Resolution | None = None) -> BetaStar:
    """inf{beta > 0 : Lip^p C_p A_{beta,p} < 1} by bisection in log(beta)."""
    Bp = 2.0 * p if Bp is None else Bp
    m2 = require_finite_variance(measure)
    mp = moment_mp(measure, p)
    if not math.isfinite(mp):
        raise MomentGateError(f"m_{p} is infinite")
    lo, hi = beta_range
    if lip_sigma == 0:
        return BetaStar(0.0, "zero", (lo, hi))
    scale = lip_sigma**p * rosenthal_constant(p, m2, mp, Bp)
    ok = lambda b: scale * float(a_beta_p(op, kernel, b, p, resolution)) < 1.0
    if ok(lo):
        return BetaStar(lo, "below-range", (lo, hi))
    if not ok(hi):
        return BetaStar(math.inf, "above-range", (lo, hi))
    a, b = math.log(lo), math.log(hi)
    for _ in range(steps):
        mid = 0.5 * (a + b)
        if ok(math.exp(mid)):
            b = mid
        else:
            a = mid
    return BetaStar(math.exp(b), "ok", (lo, hi))


# ------------------------------------------------------- intermittency


def upsilon(kernel: KernelSpec, a, beta: float) -> float:
    """int over the box [a, 2a] of mu(d xi) / (beta + |xi|^2)."""
    d = kernel.d
    a = np.broadcast_to(np.asarray(a, dtype=float), (d,))
    if np.any(a <= 0):
        raise ValueError("box corner a must be positive")

    def f(*xi):
        pt = np.array(xi)
        return float(mu_density(kernel, pt if d > 1 else pt[0])) / (beta + float(pt @ pt))

    ranges = [(ai, 2 * ai) for ai in a]
    v, _ = integrate.nquad(f, ranges, opts={"epsrel": 1e-10, "epsabs": 0, "limit": 100})
    return v


@dataclass(frozen=True)
class IntermittencySearch:
    a_ladder: tuple[float, ...] = tuple(np.logspace(-4, 2, 31))
    beta_ladder: tuple[float, ...] = tuple(np.logspace(3, -10, 53))
    refine_steps: int = 40


@dataclass(frozen=True)
class Witness:
    intermittent_lb: bool
    witness_a: tuple[float, ...] | None
    witness_beta: float | None
    threshold: float


def _witness_condition(op: OperatorSpec, kernel, a, beta, threshold) -> bool:
    if op.is_heat:
        return upsilon(kernel, a, beta) >= threshold
    return upsilon(kernel, a, beta * beta / 4) / (2 * beta) >= threshold


def _largest_beta(op, kernel, a, threshold, betas, refine_steps, floor=None):
    """Largest beta on the descending ladder passing the witness test, refined by bisection."""
    prev = None
    for b in betas:
        if floor is not None and b <= floor:
            return None
        if _witness_condition(op, kernel, a, b, threshold):
            if prev is None or not refine_steps:
                return b
            lo, hi = math.log(b), math.log(prev)
            for _ in range(refine_steps):
                mid = 0.5 * (lo + hi)
                if _witness_condition(op, kernel, a, math.exp(mid), threshold):
                    lo = mid
                else:
                    hi = mid
            return math.exp(lo)
        prev = b
    return None


def intermittency_check(op: OperatorSpec, kernel: KernelSpec, measure: LevyMeasureSpec,
                        lip_lower: float, search: IntermittencySearch | None = None) -> Witness:
    """Search boxes a and rates beta certifying gamma(2) >= beta > 0.

    heat: Upsilon_a(beta) >= 1/(m_2 L^2)
    wave: Upsilon_a(beta^2/4) / (2 beta) >= 1/(m_2 L^2)

    Boxes are cubes a*(1,...,1). After the ladder scan, the best box is
    polished by golden-section search in log(a). Every returned witness
    satisfies the test exactly as evaluated.
    """
    search = search or IntermittencySearch()
    m2 = require_finite_variance(measure)
    threshold = 1.0 / (m2 * lip_lower**2)
    d = op.d
    betas = sorted(search.beta_ladder, reverse=True)
    best_a, best_b = None, None
    for a0 in search.a_ladder:
        b = _largest_beta(op, kernel, (a0,) * d, threshold, betas, search.refine_steps, best_b)
        if b is not None and (best_b is None or b > best_b):
            best_a, best_b = a0, b
    if best_a is None:
        return Witness(False, None, None, threshold)
    ladder = sorted(search.a_ladder)
    i = ladder.index(best_a)
    lo = math.log(ladder[max(i - 1, 0)])
    hi = math.log(ladder[min(i + 1, len(ladder) - 1)])

    def score(loga):
        b = _largest_beta(op, kernel, (math.exp(loga),) * d, threshold, betas, search.refine_steps)
        return -(b or 0.0)

    if hi > lo:
        res = optimize.minimize_scalar(score, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-3})
        if -res.fun > best_b:
            best_a, best_b = math.exp(res.x), -res.fun
    return Witness(True, (float(best_a),) * d, float(best_b), threshold)


# --------------------------------------------------------- chaos series


class _RadialSampler:
    """Samples |xi| from the density prop. to r^{d-1} |F kappa(r)|^2 on [0, R]."""

    def __init__(self, kernel, d: int, R: float):
        self.d, self.R = d, R
        g = lambda r: r ** (d - 1) * float(_spectral_sq_radial(kernel, r))
        self.riesz = isinstance(kernel, RieszKernel)
        if self.riesz:
            self.s = d - kernel.alpha
            radial_mass = R**self.s / self.s
        else:
            r = np.concatenate([[0.0], np.geomspace(R * 1e-9, R, 200001)])
            dens = np.array([g(x) for x in r]) if r.size < 2000 else _vector_radial(kernel, d, r)
            cdf = integrate.cumulative_trapezoid(dens, r, initial=0.0)
            radial_mass = float(cdf[-1])
            self.r, self.cdf = r, cdf / cdf[-1]
        self.mass = sphere_area(d) * radial_mass / (2 * math.pi) ** d

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        u = gen.random(size)
        if self.riesz:
            rad = self.R * u ** (1 / self.s)
        else:
            rad = np.interp(u, self.cdf, self.r)
        direction = gen.standard_normal((size, self.d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        return rad[:, None] * direction


def _vector_radial(kernel, d, r):
    return r ** (d - 1) * _spectral_sq_radial(kernel, r)


class _GaussianSampler:
    def __init__(self, alpha: float, d: int):
        self.sd, self.d = 1 / math.sqrt(alpha), d
        self.mass = (2 * math.pi * alpha) ** (-d / 2)

    def sample(self, gen, size):
        return self.sd * gen.standard_normal((size, self.d))


class _ProductSampler:
    def __init__(self, parts):
        self.parts = parts
        self.mass = math.prod(p.mass for p in parts)

    def sample(self, gen, size):
        return np.concatenate([p.sample(gen, size) for p in self.parts], axis=1)


def _dalang_tail_cutoff(kernel, d: int, tol: float) -> float:
    """Radius beyond which mu/(1+|xi|^2) carries a fraction < tol of its mass."""
    g = lambda r: r ** (d - 1) * float(_spectral_sq_radial(kernel, r)) / (1 + r * r)
    total = _radial_tail(g, 0.0)
    f = lambda logR: _radial_tail(g, math.exp(logR)) / total - tol
    return math.exp(optimize.brentq(f, math.log(1e-3), math.log(1e12), xtol=1e-6))


def _radial_tail(g, R: float) -> float:
    pts = [R] + [x for x in (1.0, 10.0, 100.0) if x > R]
    tot = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        tot += integrate.quad(g, a, b, limit=200, epsrel=1e-10)[0]
    tot += integrate.quad(g, pts[-1], np.inf, limit=200, epsrel=1e-10)[0]
    return tot


def mu_sampler(kernel: KernelSpec, cutoff: float | None = None, tol: float = 1e-3):
    """Sampler for mu normalized to a probability, with its (restricted) mass."""
    if isinstance(kernel, HeatKernel):
        return _GaussianSampler(kernel.alpha, kernel.d), None
    if isinstance(kernel, ProductKernel):
        parts, cuts = [], []
        for f in kernel.factors:
            s, c = mu_sampler(f, cutoff, tol)
            parts.append(s)
            cuts.append(c)
        return _ProductSampler(parts), cuts
    R = cutoff if cutoff is not None else _dalang_tail_cutoff(kernel, kernel.d, tol)
    return _RadialSampler(kernel, kernel.d, R), R


@dataclass
class ChaosSeriesResult:
    terms: list[tuple[int, float, float]]
    partial_sum: float
    partial_sum_stderr: float
    n_max: int
    eta: float
    lam: float
    m2: float
    t: float
    xi_cutoff: object = None
    samples: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def _chaos_chunk(op, sampler, n, t, size, seed, chunk):
    gen = _rng.stream(seed, n, chunk, _rng.CHAOS)
    times = np.sort(gen.random((size, n)), axis=1) * t
    times = np.concatenate([times, np.full((size, 1), t)], axis=1)
    acc = np.zeros((size, op.d))
    prod = np.ones(size)
    for j in range(n):
        acc = acc + sampler.sample(gen, size)
        gap = times[:, j + 1] - times[:, j]
        prod *= fourier_sq_radial(op, gap, np.linalg.norm(acc, axis=1))
    return math.fsum(prod), math.fsum(prod * prod)


def anderson_second_moment(op: OperatorSpec, kernel: KernelSpec, measure: LevyMeasureSpec,
                           lam: float, eta: float, t: float, n_max: int, samples: int,
                           seed: int, xi_cutoff: float | None = None, threads: int = 1,
                           chunk: int = 1 << 16) -> ChaosSeriesResult:
    """Chaos-series evaluation of E|u(t,x)|^2 for sigma(u) = lam * u.

    Term n is eta^2 (m_2 lam^2)^n times the integral over the time simplex
    of prod_j |F G_{t_{j+1}-t_j}(xi_1 + ... + xi_j)|^2 against mu^{(n)},
    with t_{n+1} = t. It is estimated by sorted uniform times and xi_j
    drawn from normalized mu.
    """
    m2 = require_finite_variance(measure)
    _check_dalang(kernel, False)
    sampler, cut = mu_sampler(kernel, xi_cutoff)
    terms = [(0, eta * eta, 0.0)]
    var_total = 0.0
    for n in range(1, n_max + 1):
        sizes = [min(chunk, samples - i) for i in range(0, samples, chunk)]
        jobs = [(op, sampler, n, t, s, seed, c) for c, s in enumerate(sizes)]
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                parts = list(ex.map(lambda a: _chaos_chunk(*a), jobs))
        else:
            parts = [_chaos_chunk(*a) for a in jobs]
        s1 = math.fsum(p[0] for p in parts)
        s2 = math.fsum(p[1] for p in parts)
        mean = s1 / samples
        var = max(s2 / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
        factor = eta * eta * (m2 * lam * lam * sampler.mass * t) ** n / math.factorial(n)
        terms.append((n, factor * mean, factor * math.sqrt(var / samples)))
        var_total += (factor * math.sqrt(var / samples)) ** 2
    total = math.fsum(v for _, v, _ in terms)
    return ChaosSeriesResult(terms, total, math.sqrt(var_total), n_max, eta, lam, m2, t,
                             cut, samples)


# -------------------------------------------------- exact Lyapunov rates


def lyapunov_exact(op: OperatorSpec | str, d: int, kernel_alpha: float, lam: float,
                   m2: float, rho: float) -> float:
    """Closed-form growth rate for Riesz-type covariance with alpha' = d - alpha.

    heat: (sqrt(m2) lam rho)^{2/(2-alpha')}
    wave: (2^{1-alpha'} sqrt(m2) lam rho)^{1/(3-alpha')}
    """
    kind = op.kind if isinstance(op, OperatorSpec) else op
    ap = d - kernel_alpha
    theta = math.sqrt(m2) * lam
    if kind == "heat":
        if ap >= 2:
            raise DomainError("heat formula needs alpha' < 2")
        return (theta * rho) ** (2 / (2 - ap))
    if ap >= 3:
        raise DomainError("wave formula needs alpha' < 3")
    return (2 ** (1 - ap) * theta * rho) ** (1 / (3 - ap))


# ----------------------------------------------------------- reporting


def fit_loglog(ts, values) -> tuple[float, float]:
    """OLS slope of log(values) on log(ts) and its standard error."""
    x = np.log(np.asarray(ts, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return _ols(x, y)


def _ols(x, y) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xm
    dof = max(len(x) - 2, 1)
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, se


@dataclass
class BoundReport:
    p: float
    jp_samples: list[tuple[float, float]] = field(default_factory=list)
    jp_bound: list[tuple[float, float]] = field(default_factory=list)
    mp_samples: list[tuple[float, float]] = field(default_factory=list)
    linear_p_bound: list[tuple[float, float]] = field(default_factory=list)
    a_beta_p: list[tuple[float, float]] = field(default_factory=list)
    beta_star: float | None = None
    beta_star_flag: str | None = None
    fitted_exponents: list[tuple[str, float, float]] = field(default_factory=list)
    constants_used: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_json_default)


def _json_default(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(x)
