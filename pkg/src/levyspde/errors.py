"""Exception types. Each carries a short `reason` slug used by the CLI."""

from __future__ import annotations


class LevySpdeError(Exception):
    reason = "error"


class ConfigError(LevySpdeError):
    reason = "config-invalid"


class GridMismatchError(LevySpdeError):
    reason = "grid-mismatch"


class UnsupportedError(LevySpdeError):
    reason = "unsupported-combination"


class FiniteVarianceError(LevySpdeError):
    """The Levy measure has m_2 = +inf."""

    reason = "finite-variance-violated"


class MomentGateError(LevySpdeError):
    """A p-th moment m_p of the Levy measure is infinite."""

    reason = "moment-gate-failed"


class DalangError(LevySpdeError):
    reason = "dalang-condition-failed"


class DivergenceError(LevySpdeError):
    """A time integral of J_p^{p/2} diverges at t = 0."""

    reason = "integral-diverges"


class DomainError(LevySpdeError):
    reason = "formula-domain"


class BlowUpError(LevySpdeError):
    reason = "blow-up"

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"field left the finite range at step {step}")
