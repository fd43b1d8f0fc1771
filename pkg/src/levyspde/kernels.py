"""Coloring kernels kappa, their spectral densities and grid convolution.

Every kernel of "order alpha" is the member of its family with parameter
alpha/2, so that f = kappa * kappa is the family member of parameter alpha
and |F kappa|^2 = F f has the familiar closed form:

    heat     exp(-alpha |xi|^2 / 2)
    riesz    |xi|^{-alpha}
    bessel   (1 + |xi|^2)^{-alpha/2}
    poisson  exp(-alpha |xi|)

The spectral measure is mu(d xi) = (2 pi)^{-d} |F kappa(xi)|^2 d xi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import integrate
from scipy.special import erfc, gammaln, kv
from scipy.special import gamma as gamma_fn

from .errors import ConfigError, GridMismatchError
from .grid import SimGrid

__all__ = [
    "HeatKernel", "RieszKernel", "BesselKernel", "PoissonKernel", "ProductKernel",
    "KernelSpec", "SimGrid", "kernel_value", "kernel_fourier_sq", "f_value",
    "dalang_condition", "convolve_periodic", "cell_averaged_kernel", "spectral_amplitude",
]


@dataclass(frozen=True)
class HeatKernel:
    alpha: float
    d: int = 1

    def __post_init__(self):
        if self.alpha <= 0 or self.d < 1:
            raise ConfigError("heat kernel needs alpha > 0 and d >= 1")


@dataclass(frozen=True)
class RieszKernel:
    alpha: float
    d: int = 1

    def __post_init__(self):
        if not 0 < self.alpha < self.d:
            raise ConfigError(f"Riesz kernel needs 0 < alpha < d, got alpha={self.alpha}, d={self.d}")


@dataclass(frozen=True)
class BesselKernel:
    alpha: float
    d: int = 1

    def __post_init__(self):
        if self.alpha <= 0 or self.d < 1:
            raise ConfigError("Bessel kernel needs alpha > 0 and d >= 1")


@dataclass(frozen=True)
class PoissonKernel:
    alpha: float
    d: int = 1

    def __post_init__(self):
        if self.alpha <= 0 or self.d < 1:
            raise ConfigError("Poisson kernel needs alpha > 0 and d >= 1")


IsotropicKernel = Union[HeatKernel, RieszKernel, BesselKernel, PoissonKernel]


@dataclass(frozen=True)
class ProductKernel:
    """kappa(x) = prod_j kappa_j(x_j) with one-dimensional factors."""

    factors: tuple[IsotropicKernel, ...]

    def __post_init__(self):
        if not self.factors:
            raise ConfigError("product kernel needs at least one factor")
        for f in self.factors:
            if isinstance(f, ProductKernel) or f.d != 1:
                raise ConfigError("product factors must be one-dimensional isotropic kernels")

    @property
    def d(self) -> int:
        return len(self.factors)


KernelSpec = Union[HeatKernel, RieszKernel, BesselKernel, PoissonKernel, ProductKernel]


# ---------------------------------------------------------------- families

def riesz_constant(d: int, a: float) -> float:
    """C_{d,a} with F(C_{d,a} |x|^{-(d-a)}) = |xi|^{-a}."""
    return math.exp(-0.5 * d * math.log(math.pi) - a * math.log(2.0)
                    + gammaln((d - a) / 2) - gammaln(a / 2))


def heat_family(d: int, a: float, r):
    r = np.asarray(r, dtype=float)
    return (2 * np.pi * a) ** (-d / 2) * np.exp(-(r * r) / (2 * a))


def riesz_family(d: int, a: float, r):
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return riesz_constant(d, a) * np.where(r > 0, r, 0.0) ** (-(d - a))


def bessel_family(d: int, a: float, r):
    """Closed form through the modified Bessel function K."""
    r = np.asarray(r, dtype=float)
    nu = (a - d) / 2
    pref = (4 * np.pi) ** (-d / 2) / gamma_fn(a / 2)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        val = pref * 2.0 * (r / 2) ** nu * kv(nu, r)
    if a > d:
        at0 = pref * gamma_fn(nu)
    else:
        at0 = np.inf
    return np.where(r > 0, val, at0)


def bessel_family_quad(d: int, a: float, r: float) -> float:
    """The defining subordination integral, evaluated by adaptive quadrature."""
    if r == 0:
        if a <= d:
            return math.inf
        return float((4 * np.pi) ** (-d / 2) * gamma_fn((a - d) / 2) / gamma_fn(a / 2))

    def integrand(w):
        return w ** (a / 2 - 1) * math.exp(-w - r * r / (4 * w)) * (4 * math.pi * w) ** (-d / 2)

    # the integrand peaks near w ~ r/2; split there to help the adaptive rule
    mid = max(r / 2, 1e-3)
    v1, _ = integrate.quad(integrand, 0, mid, limit=200, epsabs=0, epsrel=1e-12)
    v2, _ = integrate.quad(integrand, mid, np.inf, limit=200, epsabs=0, epsrel=1e-12)
    return (v1 + v2) / gamma_fn(a / 2)


def poisson_family(d: int, a: float, r):
    r = np.asarray(r, dtype=float)
    c = math.exp(gammaln((d + 1) / 2) - (d + 1) / 2 * math.log(math.pi))
    return c * a * (r * r + a * a) ** (-(d + 1) / 2)


def _family(kernel: IsotropicKernel):
    if isinstance(kernel, HeatKernel):
        return heat_family
    if isinstance(kernel, RieszKernel):
        return riesz_family
    if isinstance(kernel, BesselKernel):
        return bessel_family
    if isinstance(kernel, PoissonKernel):
        return poisson_family
    raise TypeError(kernel)


def _spectral_sq_radial(kernel: IsotropicKernel, rho):
    """|F kappa|^2 as a function of |xi| (isotropic kernels only)."""
    rho = np.asarray(rho, dtype=float)
    a = kernel.alpha
    if isinstance(kernel, HeatKernel):
        return np.exp(-a * rho * rho / 2)
    if isinstance(kernel, RieszKernel):
        with np.errstate(divide="ignore"):
            return np.where(rho > 0, rho, 0.0) ** (-a)
    if isinstance(kernel, BesselKernel):
        return (1 + rho * rho) ** (-a / 2)
    if isinstance(kernel, PoissonKernel):
        return np.exp(-a * rho)
    raise TypeError(kernel)


def _split(x, d):
    """Return the list of coordinate arrays of points x (last axis of size d)."""
    x = np.asarray(x, dtype=float)
    if d == 1:
        if x.ndim >= 1 and x.shape[-1] == 1:
            x = x[..., 0]
        return [x]
    if x.shape[-1] != d:
        raise ValueError(f"expected points with last axis of size {d}, got shape {x.shape}")
    return [x[..., i] for i in range(d)]


def _norm(x, d):
    comps = _split(x, d)
    return np.sqrt(sum(c * c for c in comps))


def _scalarize(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def kernel_value(kernel: KernelSpec, x):
    """kappa(x). Singular kernels return +inf at the origin.

    Bessel values come from adaptive quadrature of the subordination
    integral, one point at a time; use `bessel_family` for bulk work.
    """
    if isinstance(kernel, ProductKernel):
        comps = _split(x, kernel.d)
        return _scalarize(np.prod([kernel_value(f, c) for f, c in zip(kernel.factors, comps)], axis=0))
    r = _norm(x, kernel.d)
    a = kernel.alpha / 2
    if isinstance(kernel, BesselKernel):
        flat = np.vectorize(lambda rr: bessel_family_quad(kernel.d, a, float(rr)))(r)
        return _scalarize(flat)
    return _scalarize(_family(kernel)(kernel.d, a, r))


def kernel_value_fast(kernel: KernelSpec, x):
    """Vectorized kappa(x) using closed forms everywhere."""
    if isinstance(kernel, ProductKernel):
        comps = _split(x, kernel.d)
        return np.prod([kernel_value_fast(f, c) for f, c in zip(kernel.factors, comps)], axis=0)
    return _family(kernel)(kernel.d, kernel.alpha / 2, _norm(x, kernel.d))


def f_value(kernel: KernelSpec, x):
    """f = kappa * kappa, the family member of doubled order."""
    if isinstance(kernel, ProductKernel):
        comps = _split(x, kernel.d)
        return _scalarize(np.prod([f_value(f, c) for f, c in zip(kernel.factors, comps)], axis=0))
    return _scalarize(_family(kernel)(kernel.d, kernel.alpha, _norm(x, kernel.d)))


def kernel_fourier_sq(kernel: KernelSpec, xi):
    """|F kappa(xi)|^2. For Riesz kernels xi = 0 yields +inf."""
    if isinstance(kernel, ProductKernel):
        comps = _split(xi, kernel.d)
        return _scalarize(np.prod([kernel_fourier_sq(f, c) for f, c in zip(kernel.factors, comps)], axis=0))
    return _scalarize(_spectral_sq_radial(kernel, _norm(xi, kernel.d)))


def mu_density(kernel: KernelSpec, xi):
    """Density of mu with respect to Lebesgue measure."""
    return kernel_fourier_sq(kernel, xi) / (2 * np.pi) ** kernel.d


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / gamma_fn(d / 2)


# ------------------------------------------------------------ Dalang check

class DalangResult:
    """Classification plus the integral value, computed on first access."""

    def __init__(self, kernel: KernelSpec, holds: bool):
        self.kernel = kernel
        self.holds = holds

    @property
    def value(self) -> float:
        return _dalang_value(self.kernel) if self.holds else math.inf

    def __repr__(self):
        return f"DalangResult(holds={self.holds})"


def _decay_exponent(k: IsotropicKernel) -> float:
    """Power-law decay rate of |F kappa|^2 at infinity (inf for exponential decay)."""
    if isinstance(k, (RieszKernel, BesselKernel)):
        return k.alpha
    return math.inf


def _dalang_holds(kernel: KernelSpec) -> bool:
    if isinstance(kernel, (HeatKernel, PoissonKernel)):
        return True
    if isinstance(kernel, RieszKernel):
        return kernel.alpha > max(kernel.d - 2, 0)
    if isinstance(kernel, BesselKernel):
        return kernel.alpha > kernel.d - 2
    # Product: with 1/(1+|xi|^2) ~ 1/max_j xi_j^2 the integral over the region
    # where coordinate k dominates converges iff
    #   (1 - a_k) + sum_{j != k} (1 - a_j)_+ < 2
    # for every k, where a_j is the decay exponent of factor j.
    a = [_decay_exponent(f) for f in kernel.factors]
    for k, ak in enumerate(a):
        if math.isinf(ak):
            continue
        rest = sum(max(1 - aj, 0.0) for j, aj in enumerate(a) if j != k and not math.isinf(aj))
        if (1 - ak) + rest >= 2:
            return False
    return True


def _radial_integral(fn, lo=0.0, hi=np.inf) -> float:
    pieces = [(lo, 1.0), (1.0, hi)] if lo < 1.0 < hi else [(lo, hi)]
    tot = 0.0
    for a, b in pieces:
        v, _ = integrate.quad(fn, a, b, limit=400, epsrel=1e-10, epsabs=0)
        tot += v
    return tot


def _one_d_gaussian_moment(k: IsotropicKernel, s: float) -> float:
    """(2 pi)^{-1} int exp(-s xi^2) |F kappa(xi)|^2 d xi for a 1-d factor."""
    if isinstance(k, HeatKernel):
        return (2 * np.pi) ** -1 * math.sqrt(math.pi / (s + k.alpha / 2))
    g = lambda r: math.exp(-s * r * r) * float(_spectral_sq_radial(k, r))
    return 2 * _radial_integral(g) / (2 * np.pi)


def dalang_integral(kernel: KernelSpec) -> float:
    """int mu(d xi) / (1 + |xi|^2) by quadrature (call only when finite)."""
    if isinstance(kernel, ProductKernel):
        # 1/(1+|xi|^2) = int_0^inf exp(-s(1+|xi|^2)) ds factorizes the xi-integral
        def outer(s):
            return math.exp(-s) * math.prod(_one_d_gaussian_moment(f, s) for f in kernel.factors)
        return _radial_integral(outer)
    d = kernel.d
    c = sphere_area(d) / (2 * np.pi) ** d
    return c * _radial_integral(lambda r: r ** (d - 1) * float(_spectral_sq_radial(kernel, r)) / (1 + r * r))


@lru_cache(maxsize=256)
def _dalang_value(kernel: KernelSpec) -> float:
    return float(dalang_integral(kernel))


def dalang_condition(kernel: KernelSpec) -> DalangResult:
    return DalangResult(kernel, _dalang_holds(kernel))


# ------------------------------------------------------ grid convolution

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def _radial_primitive(kernel: IsotropicKernel, R: float) -> float:
    """int_0^R kappa(r) r^{d-1} dr."""
    d, a = kernel.d, kernel.alpha / 2
    if isinstance(kernel, RieszKernel):
        return riesz_constant(d, a) * R**a / a
    fam = _family(kernel)
    v, _ = integrate.quad(lambda r: float(fam(d, a, r)) * r ** (d - 1), 0, R, limit=200, epsrel=1e-12, epsabs=0)
    return v


def _cube_integral_radial(d: int, h: float, primitive) -> float:
    """int over [-h, h]^d of a radial function with radial primitive F.

    Split the cube into 2d pyramids with apex at the origin; on the pyramid
    over the face x_d = h the radial integral collapses to |y|^{-d} F(|y|).
    """
    if d == 1:
        return 2 * primitive(h)
    m = 24
    nodes, weights = np.polynomial.legendre.leggauss(m)
    y = h * nodes
    w = h * weights
    grids = np.meshgrid(*([y] * (d - 1)), indexing="ij")
    wts = np.prod(np.meshgrid(*([w] * (d - 1)), indexing="ij"), axis=0)
    rr = np.sqrt(h * h + sum(g * g for g in grids))
    vals = np.vectorize(primitive)(rr) * rr ** (-d)
    return 2 * d * h * float(np.sum(wts * vals))


def _singular_at_origin(kernel: IsotropicKernel) -> bool:
    if isinstance(kernel, RieszKernel):
        return True
    if isinstance(kernel, BesselKernel):
        return kernel.alpha / 2 <= kernel.d
    return False


def _image_count(kernel: IsotropicKernel, d: int) -> int:
    if isinstance(kernel, RieszKernel):
        return 0  # the periodic sum diverges; truncate to one period
    return 2 if d == 1 else 1


def _heat_cell_average_1d(a: float, centers: np.ndarray, dx: float) -> np.ndarray:
    """(1/dx) int over [c - dx/2, c + dx/2] of the 1-d Gaussian of variance a."""
    s = math.sqrt(2 * a)
    c = np.abs(centers)
    lo = (c - dx / 2) / s
    hi = (c + dx / 2) / s
    # erfc keeps relative precision far in the tail
    inside = lo < 0
    val = np.where(inside, 2 - erfc(-lo) - erfc(hi), erfc(lo) - erfc(hi))
    return val / (2 * dx)


def _offsets(grid: SimGrid) -> np.ndarray:
    """Signed offsets m*dx in FFT order."""
    return grid.dx * np.fft.fftfreq(grid.n, d=1.0 / grid.n)


def _cell_average_isotropic(kernel: IsotropicKernel, grid: SimGrid) -> np.ndarray:
    d, dx, period = kernel.d, grid.dx, 2 * grid.half_width
    off = _offsets(grid)
    M = _image_count(kernel, d)
    shifts = period * np.arange(-M, M + 1)

    if isinstance(kernel, HeatKernel):
        a = kernel.alpha / 2
        one = sum(_heat_cell_average_1d(a, off + s, dx) for s in shifts)
        out = one
        for _ in range(d - 1):
            out = np.multiply.outer(out, one)
        return out

    fam = _family(kernel)
    a = kernel.alpha / 2
    half = 0.5 * dx * _GL_NODES
    wq = 0.5 * _GL_WEIGHTS
    coords = [np.add.outer(off, half)] * d  # (N, q) per axis
    out = np.zeros(grid.shape)
    for img in np.ndindex(*((2 * M + 1,) * d)):
        shift = [shifts[i] for i in img]
        # tensor Gauss-Legendre over each cell
        acc = np.zeros(grid.shape)
        for qidx in np.ndindex(*((len(wq),) * d)):
            r2 = 0.0
            for ax in range(d):
                c = coords[ax][:, qidx[ax]] + shift[ax]
                shape = [1] * d
                shape[ax] = grid.n
                r2 = r2 + (c * c).reshape(shape)
            wprod = math.prod(wq[q] for q in qidx)
            acc += wprod * fam(d, a, np.sqrt(r2))
        out += acc
    if _singular_at_origin(kernel):
        origin_avg = _cube_integral_radial(d, dx / 2, lambda R: _radial_primitive(kernel, R)) / dx**d
        images = _image_sum_at_origin(kernel, grid, shifts, fam, a, half, wq) if M else 0.0
        out[(0,) * d] = origin_avg + images
    return out


def _image_sum_at_origin(kernel, grid, shifts, fam, a, half, wq):
    """Contribution of periodic images (excluding the central copy) to the origin cell."""
    d = kernel.d
    tot = 0.0
    M = (len(shifts) - 1) // 2
    for img in np.ndindex(*((2 * M + 1,) * d)):
        if all(i == M for i in img):
            continue
        for qidx in np.ndindex(*((len(wq),) * d)):
            r2 = sum((half[qidx[ax]] + shifts[img[ax]]) ** 2 for ax in range(d))
            tot += math.prod(wq[q] for q in qidx) * float(fam(d, a, math.sqrt(r2)))
    return tot


def cell_averaged_kernel(kernel: KernelSpec, grid: SimGrid) -> np.ndarray:
    """Periodized kernel averaged over each grid cell, indexed by offset in FFT order."""
    if kernel.d != grid.d:
        raise GridMismatchError(f"kernel dimension {kernel.d} != grid dimension {grid.d}")
    return _cell_average_cached(kernel, grid)


@lru_cache(maxsize=32)
def _cell_average_cached(kernel, grid):
    if isinstance(kernel, ProductKernel):
        g1 = SimGrid(1, grid.half_width, grid.n, grid.dt, grid.horizon)
        out = _cell_average_isotropic(kernel.factors[0], g1)
        for f in kernel.factors[1:]:
            out = np.multiply.outer(out, _cell_average_isotropic(f, g1))
        out.setflags(write=False)
        return out
    out = _cell_average_isotropic(kernel, grid)
    out.setflags(write=False)
    return out


def convolve_periodic(field: np.ndarray, kernel: KernelSpec, grid: SimGrid) -> np.ndarray:
    """out_i = sum_j field_j * kbar(x_i - x_j), computed with FFTs.

    `field` holds point masses at the nodes (not densities), so a unit
    spike at the origin returns the cell-averaged kernel itself.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != grid.shape:
        raise GridMismatchError(f"field shape {field.shape} does not match grid {grid.shape}")
    kbar = cell_averaged_kernel(kernel, grid)
    # align node index with offset: node j sits at offset (j - N/2) dx
    spec = np.fft.rfftn(kbar) * np.fft.rfftn(np.fft.ifftshift(field))
    return np.fft.fftshift(np.fft.irfftn(spec, s=grid.shape, axes=tuple(range(grid.d))))


def convolve_direct(field: np.ndarray, kernel: KernelSpec, grid: SimGrid) -> np.ndarray:
    """O(N^{2d}) reference implementation of `convolve_periodic`."""
    field = np.asarray(field, dtype=float)
    kbar = cell_averaged_kernel(kernel, grid)
    n = grid.n
    out = np.zeros(grid.shape)
    for i in np.ndindex(*grid.shape):
        acc = 0.0
        for j in np.ndindex(*grid.shape):
            off = tuple((ii - jj) % n for ii, jj in zip(i, j))
            acc += field[j] * kbar[off]
        out[i] = acc
    return out


# ------------------------------------------------- spectral multipliers

def _riesz_zero_mode_average(d: int, s: float, dxi: float) -> float:
    """Average of |xi|^{-s} over the frequency cell [-dxi/2, dxi/2]^d."""
    prim = lambda R: R ** (d - s) / (d - s)
    return _cube_integral_radial(d, dxi / 2, prim) / dxi**d


def _amplitude_1d_or_iso(kernel: IsotropicKernel, norm: np.ndarray, d: int, dxi: float) -> np.ndarray:
    sq = np.asarray(_spectral_sq_radial(kernel, norm), dtype=float)
    if isinstance(kernel, RieszKernel):
        sq = np.where(norm > 0, sq, _riesz_zero_mode_average(d, kernel.alpha, dxi))
    return np.sqrt(sq)


def spectral_amplitude(kernel: KernelSpec, grid: SimGrid) -> np.ndarray:
    """F kappa on the rfftn grid (real and nonnegative for all families).

    The Riesz zero mode gets the cell average of |xi|^{-alpha} so that
    |F kappa|^2 integrates the singularity consistently.
    """
    if kernel.d != grid.d:
        raise GridMismatchError(f"kernel dimension {kernel.d} != grid dimension {grid.d}")
    if isinstance(kernel, ProductKernel):
        comps = grid.rfft_wavevectors()
        out = np.ones_like(comps[0])
        for f, c in zip(kernel.factors, comps):
            out = out * _amplitude_1d_or_iso(f, np.abs(c), 1, grid.dxi)
        return out
    return _amplitude_1d_or_iso(kernel, grid.rfft_xi_norm(), grid.d, grid.dxi)


def length_scale(kernel: KernelSpec) -> float:
    """Distance beyond which kappa is negligible (inf for power-law tails)."""
    if isinstance(kernel, ProductKernel):
        return max(length_scale(f) for f in kernel.factors)
    if isinstance(kernel, HeatKernel):
        return math.sqrt(kernel.alpha / 2)
    if isinstance(kernel, BesselKernel):
        return 1.0
    return math.inf


def kernel_to_dict(k: KernelSpec) -> dict:
    if isinstance(k, ProductKernel):
        return {"variant": "product", "factors": [kernel_to_dict(f) for f in k.factors]}
    name = {HeatKernel: "heat", RieszKernel: "riesz", BesselKernel: "bessel", PoissonKernel: "poisson"}[type(k)]
    return {"variant": name, "alpha": k.alpha, "d": k.d}


def kernel_from_dict(d: dict) -> KernelSpec:
    kind = d["variant"]
    if kind == "product":
        return ProductKernel(tuple(kernel_from_dict({**f, "d": 1}) for f in d["factors"]))
    cls = {"heat": HeatKernel, "riesz": RieszKernel, "bessel": BesselKernel, "poisson": PoissonKernel}.get(kind)
    if cls is None:
        raise ConfigError(f"unknown kernel variant {kind!r}")
    return cls(float(d["alpha"]), int(d.get("d", 1)))
