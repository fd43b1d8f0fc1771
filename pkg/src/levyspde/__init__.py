"""Moment bounds, intermittency witnesses and Monte Carlo for SPDEs with colored Levy noise."""

from .errors import (
    BlowUpError, ConfigError, DalangError, DivergenceError, DomainError, FiniteVarianceError,
    GridMismatchError, LevySpdeError, MomentGateError, UnsupportedError,
)
from .green import OperatorSpec
from .grid import SimGrid
from .kernels import BesselKernel, HeatKernel, PoissonKernel, ProductKernel, RieszKernel
from .noise import CompoundPoisson, Gamma, TruncatedStable, VarianceGamma

__version__ = "0.1.0"
