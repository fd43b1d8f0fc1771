"""Named scalar nonlinearities for sigma and b.

A fixed registry keeps Lipschitz constants known and configs serializable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_PARAMS = {
    "identity": (),
    "scaled-linear": ("scale",),
    "affine-clip": ("slope", "intercept", "lower", "upper"),
    "sin-bounded": ("amplitude", "offset"),
    "constant": ("value",),
}


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    params: tuple[float, ...] = ()

    def __post_init__(self):
        if self.name not in _PARAMS:
            raise ConfigError(f"unknown nonlinearity {self.name!r}; choose from {sorted(_PARAMS)}")
        if len(self.params) != len(_PARAMS[self.name]):
            raise ConfigError(f"{self.name} takes parameters {_PARAMS[self.name]}")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        n, p = self.name, self.params
        if n == "identity":
            return u
        if n == "scaled-linear":
            return p[0] * u
        if n == "affine-clip":
            return np.clip(p[0] * u + p[1], p[2], p[3])
        if n == "sin-bounded":
            return p[0] * np.sin(u) + p[1]
        return np.full_like(u, p[0])

    @property
    def lipschitz(self) -> float:
        n, p = self.name, self.params
        if n == "identity":
            return 1.0
        if n in ("scaled-linear", "affine-clip", "sin-bounded"):
            return abs(p[0])
        return 0.0

    @property
    def is_zero(self) -> bool:
        return self.name == "constant" and self.params[0] == 0.0

    def to_dict(self) -> dict:
        return {"name": self.name, **dict(zip(_PARAMS[self.name], self.params))}


def nonlinearity_from_dict(d: dict | str) -> Nonlinearity:
    if isinstance(d, str):
        return Nonlinearity(d)
    name = d.get("name")
    if name not in _PARAMS:
        raise ConfigError(f"unknown nonlinearity {name!r}")
    try:
        params = tuple(float(d[k]) for k in _PARAMS[name])
    except KeyError as e:
        raise ConfigError(f"{name} is missing parameter {e}") from None
    return Nonlinearity(name, params)


ZERO = Nonlinearity("constant", (0.0,))
ONE = Nonlinearity("constant", (1.0,))


def scaled(lam: float) -> Nonlinearity:
    return Nonlinearity("scaled-linear", (float(lam),))
