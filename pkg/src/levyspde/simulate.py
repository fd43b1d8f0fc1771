"""Mild-solution simulation on the periodic grid.

The state is the deviation w = u - eta, kept in Fourier space. Each step
    1. draws the slab's noise increments dL on every spatial cell,
    2. colors them: c = kappa * dL, applied through F kappa,
    3. forms the source sigma(u_k) c (plus b(u_k) dt for the drift),
    4. propagates: the state over dt, the source over dt/2.
For the heat operator step 4 is w <- P(dt) w + P(dt/2) source with
P(s) = exp(-s|xi|^2/2). For the wave operator the pair (w, d_t w) is
rotated by half a step, the source kicks the velocity, and the pair is
rotated again. Injecting the source at the step midpoint makes the
discrete isometry a midpoint rule in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import _check_dalang
from .errors import BlowUpError, UnsupportedError
from .green import OperatorSpec
from .grid import SimGrid
from .kernels import KernelSpec, spectral_amplitude
from .models import ONE, ZERO, Nonlinearity, scaled
from .noise import LevyMeasureSpec, require_finite_variance, sample_white_noise, step_increments

BLOW_UP = 1e12


@dataclass
class FieldSeries:
    grid: SimGrid
    times: np.ndarray
    values: np.ndarray = field(repr=False)  # shape (len(times),) + grid.shape
    model: str
    eta: float
    seed_key: tuple[int, int]

    def export(self, path):
        """Binary little-endian float64 values plus JSON sidecar."""
        import json
        from pathlib import Path
        path = Path(path)
        np.ascontiguousarray(self.values, dtype="<f8").tofile(path.with_suffix(".bin"))
        meta = {"format": "float64-le-row-major", "shape": list(self.values.shape),
                "times": self.times.tolist(), "grid": self.grid.to_dict(), "model": self.model,
                "eta": self.eta, "seed_key": list(self.seed_key)}
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


class Stepper:
    """Spectral propagator for a block of replicates sharing one grid."""

    def __init__(self, op: OperatorSpec, kernel: KernelSpec, grid: SimGrid):
        if op.d != grid.d or kernel.d != grid.d:
            raise ValueError("operator, kernel and grid dimensions must agree")
        if not op.is_heat and grid.d > 2:
            raise UnsupportedError("wave simulation is supported for d <= 2")
        self.op, self.grid = op, grid
        self.axes = tuple(range(-grid.d, 0))
        self.amp = spectral_amplitude(kernel, grid) / grid.space_cell_volume
        rho = grid.rfft_xi_norm()
        dt = grid.dt
        if op.is_heat:
            self.full = np.exp(-dt * rho * rho / 2)
            self.half = np.exp(-dt * rho * rho / 4)
        else:
            h = dt / 2
            self.cos = np.cos(h * rho)
            self.sinc = h * np.sinc(h * rho / np.pi)  # sin(h rho)/rho, limit h at 0
            self.msin = -rho * np.sin(h * rho)

    def _fft(self, a):
        return np.fft.rfftn(a, axes=self.axes)

    def _ifft(self, a):
        return np.fft.irfftn(a, s=self.grid.shape, axes=self.axes)

    def colored(self, dL: np.ndarray) -> np.ndarray:
        """kappa * dL on the grid, per unit spatial volume."""
        return self._ifft(self.amp * self._fft(dL))

    def _rotate(self, w, v):
        return self.cos * w + self.sinc * v, self.msin * w + self.cos * v

    def advance(self, state, source_hat):
        if self.op.is_heat:
            (w,) = state
            return (self.full * w + self.half * source_hat,)
        w, v = self._rotate(*state)
        return self._rotate(w, v + source_hat)

    def zero_state(self, batch: int):
        shape = (batch,) + self.grid.rfft_xi_norm().shape
        z = np.zeros(shape, dtype=complex)
        return (z,) if self.op.is_heat else (z, z.copy())


def _run_block(op, kernel, measure, grid, seed, replicates, sigma: Nonlinearity, b: Nonlinearity,
               eta: float, record_steps, noise=None, history=None, stepper=None):
    """Simulate replicates together; returns u at `record_steps`, shape (R, S) + grid.shape.

    `noise` optionally supplies frozen increments of shape (R, K) + grid.shape.
    `history` optionally supplies the field fed to sigma and b at each step
    (Picard iteration), shape (R, K+1) + grid.shape.
    """
    st = stepper or Stepper(op, kernel, grid)
    R = len(replicates)
    record = sorted(set(int(s) for s in record_steps))
    out = np.empty((R, len(record)) + grid.shape)
    state = st.zero_state(R)
    w = np.zeros((R,) + grid.shape)
    pos = 0
    if record and record[0] == 0:
        out[:, 0] = eta + w
        pos = 1
    drift = not b.is_zero
    for k in range(grid.steps):
        if pos >= len(record):
            break
        u = eta + w if history is None else history[:, k]
        if noise is None:
            dL = np.stack([step_increments(measure, grid, (seed, r), k) for r in replicates])
        else:
            dL = noise[:, k]
        src = sigma(u) * st.colored(dL)
        if drift:
            src = src + b(u) * grid.dt
        state = st.advance(state, st._fft(src))
        w = st._ifft(state[0])
        if not np.all(np.isfinite(w)) or np.max(np.abs(eta + w)) > BLOW_UP:
            raise BlowUpError(k + 1)
        if record[pos] == k + 1:
            out[:, pos] = eta + w
            pos += 1
    return out, record


def _series(grid, values, record, model, eta, seed_key):
    return FieldSeries(grid, grid.dt * np.asarray(record, dtype=float), values, model, eta, seed_key)


def simulate_nonlinear(op: OperatorSpec, kernel: KernelSpec, measure: LevyMeasureSpec,
                       sigma: Nonlinearity, b: Nonlinearity, eta: float, grid: SimGrid,
                       seed_key: tuple[int, int], record_steps=None, model: str | None = None,
                       allow_no_dalang: bool = False) -> FieldSeries:
    """u = eta + int G sigma(u) dX + int G b(u) ds by the spectral mild-Euler scheme."""
    require_finite_variance(measure)
    _check_dalang(kernel, allow_no_dalang)
    record = range(grid.steps + 1) if record_steps is None else record_steps
    seed, rep = seed_key
    vals, rec = _run_block(op, kernel, measure, grid, seed, [rep], sigma, b, eta, record)
    tag = model or f"nonlinear(sigma={sigma.name}, b={b.name})"
    return _series(grid, vals[0], rec, tag, eta, tuple(seed_key))


def simulate_linear(op, kernel, measure, grid, seed_key, record_steps=None, allow_no_dalang=False) -> FieldSeries:
    """v = int G * kappa dL, the additive equation with zero initial data."""
    return simulate_nonlinear(op, kernel, measure, ONE, ZERO, 0.0, grid, seed_key, record_steps,
                              "linear", allow_no_dalang)


def simulate_anderson(op, kernel, measure, lam, eta, grid, seed_key, record_steps=None) -> FieldSeries:
    return simulate_nonlinear(op, kernel, measure, scaled(lam), ZERO, eta, grid, seed_key,
                              record_steps, f"anderson(lambda={lam})")


def picard_validate(op, kernel, measure, sigma: Nonlinearity, b: Nonlinearity, eta: float,
                    grid: SimGrid, seed_key: tuple[int, int], iterations: int,
                    replicates: int = 4) -> list[float]:
    """sup over (t, x) of the replicate-mean |u_{n+1} - u_n|^2, for n = 0..iterations-1.

    Each replicate's noise is frozen across iterations; u_0 = eta.
    """
    require_finite_variance(measure)
    _check_dalang(kernel, False)
    seed, rep0 = seed_key
    reps = list(range(rep0, rep0 + replicates))
    noise = np.stack([sample_white_noise(measure, grid, (seed, r)).increments for r in reps])
    st = Stepper(op, kernel, grid)
    all_steps = range(grid.steps + 1)
    current = np.full((replicates, grid.steps + 1) + grid.shape, float(eta))
    dists = []
    for _ in range(iterations):
        nxt, _ = _run_block(op, kernel, measure, grid, seed, reps, sigma, b, eta, all_steps,
                            noise=noise, history=current, stepper=st)
        dists.append(float(np.max(np.mean((nxt - current) ** 2, axis=0))))
        current = nxt
    return dists


def picard_final(op, kernel, measure, sigma, b, eta, grid, seed_key, iterations) -> np.ndarray:
    """Final Picard iterate for one replicate, for comparison with the direct scheme."""
    seed, rep = seed_key
    noise = sample_white_noise(measure, grid, seed_key).increments[None]
    st = Stepper(op, kernel, grid)
    steps = range(grid.steps + 1)
    current = np.full((1, grid.steps + 1) + grid.shape, float(eta))
    for _ in range(iterations):
        current, _ = _run_block(op, kernel, measure, grid, seed, [rep], sigma, b, eta, steps,
                                noise=noise, history=current, stepper=st)
    return current[0]


def linear_variance_discrete(op: OperatorSpec, kernel: KernelSpec, m2: float, grid: SimGrid, t: float) -> float:
    """E|v(t,x)|^2 produced exactly by the scheme (discrete isometry), for bias studies."""
    from .bounds import Resolution, j2_grid
    res = Resolution(grid.n, grid.half_width)
    k = int(round(t / grid.dt))
    mids = (np.arange(k) + 0.5) * grid.dt
    return m2 * grid.dt * math.fsum(j2_grid(op, kernel, s, res) for s in mids)
