"""Versioned JSON experiment configuration with eager validation."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .bounds import IntermittencySearch, _check_dalang
from .errors import ConfigError, LevySpdeError, MomentGateError
from .estimate import SimulationConfig
from .green import OperatorSpec
from .grid import SimGrid
from .kernels import KernelSpec, kernel_from_dict, kernel_to_dict
from .models import ONE, ZERO, Nonlinearity, nonlinearity_from_dict, scaled
from .noise import LevyMeasureSpec, measure_from_dict, measure_to_dict, moment_mp, require_finite_variance

SCHEMA_VERSION = 1
SIMULATING = {"simulate", "moments", "report"}


@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "linear" | "anderson" | "nonlinear"
    sigma: Nonlinearity = ONE
    b: Nonlinearity = ZERO
    eta: float = 0.0
    lam: float | None = None

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"type": "linear"}
        if self.kind == "anderson":
            return {"type": "anderson", "lambda": self.lam, "eta": self.eta}
        return {"type": "nonlinear", "sigma": self.sigma.to_dict(), "b": self.b.to_dict(), "eta": self.eta}


@dataclass(frozen=True)
class AnalysisSpec:
    p: tuple[float, ...] = (2.0,)
    times: tuple[float, ...] = ()
    replicates: int = 64
    probe_stride: int = 4
    block: int = 32
    bootstrap: int = 400
    n_max: int = 4
    chaos_samples: int = 100_000
    chaos_time: float | None = None
    bound_times: tuple[float, ...] = ()
    beta_grid: tuple[float, ...] = ()
    Bp: float | None = None
    lyapunov_window: tuple[float, float] | None = None
    noise_cells: int = 1_000_000
    noise_cell_volume: float = 1.0
    search: IntermittencySearch = field(default_factory=IntermittencySearch)


@dataclass(frozen=True)
class ExperimentConfig:
    op: OperatorSpec
    kernel: KernelSpec
    measure: LevyMeasureSpec
    grid: SimGrid
    model: ModelSpec
    analysis: AnalysisSpec
    seed: int = 0
    output: str = "out"
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def simulation(self) -> SimulationConfig:
        return SimulationConfig(self.op, self.kernel, self.measure, self.grid,
                                self.model.sigma, self.model.b, self.model.eta)

    def to_dict(self) -> dict:
        """Canonical form; loading it gives back an equal config."""
        a = self.analysis
        return {
            "schema_version": SCHEMA_VERSION,
            "operator": {"kind": self.op.kind, "d": self.op.d},
            "kernel": kernel_to_dict(self.kernel),
            "measure": measure_to_dict(self.measure),
            "grid": {"half_width": self.grid.half_width, "n": self.grid.n,
                     "dt": self.grid.dt, "horizon": self.grid.horizon},
            "model": self.model.to_dict(),
            "analysis": {
                "p": list(a.p), "times": list(a.times), "replicates": a.replicates,
                "probe_stride": a.probe_stride, "block": a.block, "bootstrap": a.bootstrap,
                "n_max": a.n_max, "chaos_samples": a.chaos_samples, "chaos_time": a.chaos_time,
                "bound_times": list(a.bound_times), "beta_grid": list(a.beta_grid), "Bp": a.Bp,
                "lyapunov_window": list(a.lyapunov_window) if a.lyapunov_window else None,
                "noise_cells": a.noise_cells, "noise_cell_volume": a.noise_cell_volume,
                "intermittency": {"a_ladder": list(a.search.a_ladder),
                                  "beta_ladder": list(a.search.beta_ladder),
                                  "refine_steps": a.search.refine_steps},
            },
            "seed": self.seed,
            "output": self.output,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _section(doc: dict, key: str, required: bool = True) -> dict:
    if key not in doc:
        if required:
            raise ConfigError(f"missing section {key!r}")
        return {}
    val = doc[key]
    if not isinstance(val, dict):
        raise ConfigError(f"section {key!r} must be an object")
    return val


def _floats(xs, name) -> tuple[float, ...]:
    if xs is None:
        return ()
    if not isinstance(xs, (list, tuple)):
        raise ConfigError(f"{name} must be a list")
    return tuple(float(x) for x in xs)


def _model(m: dict) -> ModelSpec:
    kind = m.get("type", "linear")
    if kind == "linear":
        return ModelSpec("linear")
    if kind == "anderson":
        lam = float(m["lambda"])
        return ModelSpec("anderson", scaled(lam), ZERO, float(m.get("eta", 1.0)), lam)
    if kind == "nonlinear":
        return ModelSpec("nonlinear", nonlinearity_from_dict(m["sigma"]),
                         nonlinearity_from_dict(m.get("b", {"name": "constant", "value": 0.0})),
                         float(m.get("eta", 0.0)))
    raise ConfigError(f"unknown model type {kind!r}")


def _analysis(a: dict, grid: SimGrid) -> AnalysisSpec:
    inter = a.get("intermittency") or {}
    default = IntermittencySearch()
    search = IntermittencySearch(
        tuple(_floats(inter.get("a_ladder"), "a_ladder")) or default.a_ladder,
        tuple(_floats(inter.get("beta_ladder"), "beta_ladder")) or default.beta_ladder,
        int(inter.get("refine_steps", default.refine_steps)),
    )
    times = _floats(a.get("times"), "times") or (grid.horizon,)
    win = a.get("lyapunov_window")
    spec = AnalysisSpec(
        p=_floats(a.get("p"), "p") or (2.0,),
        times=times,
        replicates=int(a.get("replicates", 64)),
        probe_stride=int(a.get("probe_stride", 4)),
        block=int(a.get("block", 32)),
        bootstrap=int(a.get("bootstrap", 400)),
        n_max=int(a.get("n_max", 4)),
        chaos_samples=int(a.get("chaos_samples", 100_000)),
        chaos_time=None if a.get("chaos_time") is None else float(a["chaos_time"]),
        bound_times=_floats(a.get("bound_times"), "bound_times") or tuple(t for t in times if t > 0),
        beta_grid=_floats(a.get("beta_grid"), "beta_grid"),
        Bp=None if a.get("Bp") is None else float(a["Bp"]),
        lyapunov_window=None if win is None else (float(win[0]), float(win[1])),
        noise_cells=int(a.get("noise_cells", 1_000_000)),
        noise_cell_volume=float(a.get("noise_cell_volume", 1.0)),
        search=search,
    )
    if any(p < 2 for p in spec.p):
        raise ConfigError("every p must be >= 2")
    if spec.replicates < 2:
        raise ConfigError("replicates must be >= 2")
    if min(spec.probe_stride, spec.block, spec.bootstrap, spec.n_max, spec.chaos_samples, spec.noise_cells) < 1:
        raise ConfigError("analysis counts must be positive")
    if any(t <= 0 for t in spec.bound_times):
        raise ConfigError("bound_times must be positive")
    for t in spec.times:
        k = t / grid.dt
        if t < 0 or t > grid.horizon * (1 + 1e-12) or abs(k - round(k)) > 1e-9 * max(k, 1.0):
            raise ConfigError(f"time {t} is not a grid time in [0, {grid.horizon}]")
    return spec


def parse_config(doc: dict, subcommand: str | None = None, allow_no_dalang: bool = False,
                 seed: int | None = None) -> ExperimentConfig:
    """Build and validate a config. Math gates raise their own error types."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    try:
        o = _section(doc, "operator")
        op = OperatorSpec(str(o["kind"]), int(o.get("d", 1)))
        k = dict(_section(doc, "kernel"))
        if k.get("variant") != "product":
            k.setdefault("d", op.d)
        kernel = kernel_from_dict(k)
        if kernel.d != op.d:
            raise ConfigError(f"kernel dimension {kernel.d} differs from operator dimension {op.d}")
        measure = measure_from_dict(_section(doc, "measure"))
        g = _section(doc, "grid")
        grid = SimGrid(op.d, float(g["half_width"]), int(g["n"]), float(g["dt"]), float(g["horizon"]))
        model = _model(_section(doc, "model", required=False))
        analysis = _analysis(_section(doc, "analysis", required=False), grid)
        s = int(doc.get("seed", 0)) if seed is None else int(seed)
        if not 0 <= s < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        out = str(doc.get("output", "out"))
    except LevySpdeError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{type(e).__name__}: {e}") from None

    if subcommand in SIMULATING and not op.is_heat and op.d > 2:
        raise ConfigError("wave simulation is supported for d <= 2")
    if subcommand in ("anderson-series", "intermittency") and model.kind != "anderson":
        raise ConfigError(f"{subcommand} needs an anderson model")
    # math gates, checked eagerly
    require_finite_variance(measure)
    _check_dalang(kernel, allow_no_dalang)
    if subcommand in SIMULATING:
        for p in analysis.p:
            if not math.isfinite(moment_mp(measure, p)):
                raise MomentGateError(f"m_{p:g} is infinite for {measure_to_dict(measure)['variant']}")
    return ExperimentConfig(op, kernel, measure, grid, model, analysis, s, out, doc)


def load_config(path: str | Path, subcommand: str | None = None, allow_no_dalang: bool = False,
                seed: int | None = None) -> tuple[ExperimentConfig, dict]:
    """Read a config file or a MANIFEST.json (whose embedded config and seed are used).

    Returns the config and the manifest dict ({} for plain configs).
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e}") from None
    manifest = {}
    if isinstance(doc, dict) and "manifest_version" in doc:
        manifest = doc
        doc = doc.get("config")
        if seed is None:
            seed = manifest.get("seed")
    return parse_config(doc, subcommand, allow_no_dalang, seed), manifest

