"""Space-time grid on the periodic box [-L, L)^d."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class SimGrid:
    """Nodes x_j = -L + j*dx, j = 0..N-1 in each axis; the origin is node N/2.

    Each node owns the cell [x_j - dx/2, x_j + dx/2). Time steps are
    t_k = k*dt for k = 0..K with K = round(T/dt).
    """

    d: int
    half_width: float
    n: int
    dt: float
    horizon: float

    def __post_init__(self):
        if self.d < 1:
            raise ConfigError("grid dimension must be >= 1")
        if self.n < 2 or self.n & (self.n - 1):
            raise ConfigError(f"points per dimension must be a power of two, got {self.n}")
        if not (self.half_width > 0 and self.dt > 0 and self.horizon > 0):
            raise ConfigError("half_width, dt and horizon must be positive")
        k = self.horizon / self.dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise ConfigError(f"horizon {self.horizon} is not a multiple of dt {self.dt}")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.n

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def space_cell_volume(self) -> float:
        return self.dx**self.d

    @property
    def cell_volume(self) -> float:
        return self.dt * self.dx**self.d

    @property
    def dxi(self) -> float:
        """Frequency spacing pi/L of the discrete transform."""
        return np.pi / self.half_width

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)

    def axis(self) -> np.ndarray:
        return -self.half_width + self.dx * np.arange(self.n)

    def coords(self) -> list[np.ndarray]:
        ax = self.axis()
        return list(np.meshgrid(*([ax] * self.d), indexing="ij"))

    def origin_index(self) -> tuple[int, ...]:
        return (self.n // 2,) * self.d

    @cached_property
    def _wavevectors(self):
        full = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)
        half = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.dx)
        axes = [full] * (self.d - 1) + [half]
        return np.meshgrid(*axes, indexing="ij")

    def rfft_wavevectors(self) -> list[np.ndarray]:
        """Components of xi on the grid used by numpy.fft.rfftn."""
        return self._wavevectors

    def rfft_xi_norm(self) -> np.ndarray:
        return np.sqrt(sum(k * k for k in self._wavevectors))

    def to_dict(self) -> dict:
        return {"d": self.d, "half_width": self.half_width, "n": self.n,
                "dt": self.dt, "horizon": self.horizon}
