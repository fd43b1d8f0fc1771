"""Fundamental solutions of d_t u = (1/2) Laplacian u and d_t^2 u = Laplacian u."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, UnsupportedError
from .kernels import _norm, _scalarize

HEAT = "heat"
WAVE = "wave"


@dataclass(frozen=True)
class OperatorSpec:
    kind: str
    d: int = 1

    def __post_init__(self):
        if self.kind not in (HEAT, WAVE):
            raise ConfigError(f"operator kind must be 'heat' or 'wave', got {self.kind!r}")
        if self.d < 1:
            raise ConfigError("operator dimension must be >= 1")
        if self.kind == WAVE and self.d > 3:
            raise ConfigError("wave operator is supported for d <= 3 only")

    @property
    def is_heat(self) -> bool:
        return self.kind == HEAT


def green_value(op: OperatorSpec, t: float, x):
    """G_t(x) for t > 0 (zero for t <= 0). Wave d=2 is +inf on the light cone."""
    r = _norm(x, op.d)
    if t <= 0:
        return _scalarize(np.zeros_like(r))
    if op.is_heat:
        return _scalarize((2 * np.pi * t) ** (-op.d / 2) * np.exp(-r * r / (2 * t)))
    if op.d == 1:
        return _scalarize(np.where(r < t, 0.5, 0.0))
    if op.d == 2:
        with np.errstate(divide="ignore", invalid="ignore"):
            inside = 1.0 / (2 * np.pi * np.sqrt(t * t - r * r))
        return _scalarize(np.where(r < t, inside, np.where(r == t, np.inf, 0.0)))
    raise UnsupportedError("the d=3 wave fundamental solution is a surface measure, not a function")


def green_fourier(op: OperatorSpec, t: float, xi):
    """F G_t(xi): exp(-t|xi|^2/2) for heat, sin(t|xi|)/|xi| for wave (limit t at 0)."""
    rho = _norm(xi, op.d)
    return _scalarize(_fourier_radial(op, t, rho))


def _fourier_radial(op: OperatorSpec, t: float, rho):
    rho = np.asarray(rho, dtype=float)
    if t <= 0:
        return np.ones_like(rho) if (op.is_heat and t == 0) else np.zeros_like(rho)
    if op.is_heat:
        return np.exp(-t * rho * rho / 2)
    return t * np.sinc(t * rho / np.pi)


def fourier_sq_radial(op: OperatorSpec, t, rho):
    """|F G_t|^2 as a function of |xi|; broadcasts over t and rho."""
    t = np.asarray(t, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if op.is_heat:
        return np.exp(-t * rho * rho)
    return (t * np.sinc(t * rho / np.pi)) ** 2


def laplace_green_sq(op: OperatorSpec, beta: float, xi):
    """I_beta(xi) = int_0^inf exp(-beta t) |F G_t(xi)|^2 dt."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    r2 = _norm(xi, op.d) ** 2
    if op.is_heat:
        return _scalarize(1.0 / (beta + r2))
    return _scalarize(1.0 / (2 * beta) / (beta * beta / 4 + r2))


def green_mass(op: OperatorSpec, s: float) -> float:
    """G_s(R^d): 1 for heat, s for wave."""
    return 1.0 if op.is_heat else float(s)


def green_lp_norm_sq(op: OperatorSpec, t: float, p: float) -> float:
    """||G_t||_{L^p}^2 where G_t is a function (wave d=1, d=2 with p < 2, heat)."""
    if op.is_heat:
        d = op.d
        # ||H_{d,t}||_p^p = (2 pi t)^{-dp/2} (2 pi t / p)^{d/2}
        log_pp = -d * p / 2 * math.log(2 * math.pi * t) + d / 2 * math.log(2 * math.pi * t / p)
        return math.exp(2 / p * log_pp)
    if op.d == 1:
        return (2 * t * 0.5**p) ** (2 / p)
    if op.d == 2 and p < 2:
        # int_{|x|<t} (2 pi)^{-p} (t^2 - |x|^2)^{-p/2} dx = (2 pi)^{1-p} t^{2-p} / (2 - p)
        return ((2 * math.pi) ** (1 - p) * t ** (2 - p) / (2 - p)) ** (2 / p)
    raise UnsupportedError(f"||G_t||_p is infinite or undefined for wave d={op.d}, p={p}")
