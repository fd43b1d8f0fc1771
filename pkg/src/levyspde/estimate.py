"""Monte Carlo moments, growth-rate fits and bound comparisons."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import rng as _rng
from .bounds import _check_dalang, _ols
from .errors import BlowUpError, GridMismatchError, MomentGateError
from .green import OperatorSpec
from .grid import SimGrid
from .kernels import KernelSpec
from .models import ONE, ZERO, Nonlinearity, scaled
from .noise import LevyMeasureSpec, moment_mp, require_finite_variance
from .simulate import Stepper, _run_block


@dataclass(frozen=True)
class SimulationConfig:
    op: OperatorSpec
    kernel: KernelSpec
    measure: LevyMeasureSpec
    grid: SimGrid
    sigma: Nonlinearity = ONE
    b: Nonlinearity = ZERO
    eta: float = 0.0

    @classmethod
    def linear(cls, op, kernel, measure, grid):
        return cls(op, kernel, measure, grid, ONE, ZERO, 0.0)

    @classmethod
    def anderson(cls, op, kernel, measure, grid, lam, eta):
        return cls(op, kernel, measure, grid, scaled(lam), ZERO, float(eta))


@dataclass
class MomentReport:
    times: list[float]
    p_values: list[float]
    estimates: np.ndarray  # (T, P)
    stderr: np.ndarray  # (T, P)
    replicates: int
    probes: int
    ess: np.ndarray  # (T, P)
    low_ess: list[tuple[float, float]] = field(default_factory=list)
    aborted: list[int] = field(default_factory=list)
    abort_flag: bool = False
    replicate_values: np.ndarray | None = field(default=None, repr=False)  # (R, T, P)
    bootstrap_index: np.ndarray | None = field(default=None, repr=False)

    def estimate(self, t: float, p: float) -> tuple[float, float]:
        i, j = self._index(t, p)
        return float(self.estimates[i, j]), float(self.stderr[i, j])

    def _index(self, t, p):
        i = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise GridMismatchError(f"time {t} not in report")
        j = list(self.p_values).index(p)
        return i, j

    def to_dict(self) -> dict:
        return {
            "times": list(self.times), "p_values": list(self.p_values),
            "estimates": self.estimates.tolist(), "stderr": self.stderr.tolist(),
            "replicates": self.replicates, "probes": self.probes, "ess": self.ess.tolist(),
            "low_ess": self.low_ess, "aborted": self.aborted, "abort_flag": self.abort_flag,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _record_steps(grid: SimGrid, times) -> list[int]:
    steps = []
    for t in times:
        k = t / grid.dt
        if abs(k - round(k)) > 1e-9 * max(1.0, k) or not 0 <= round(k) <= grid.steps:
            raise GridMismatchError(f"time {t} is not on the grid's time lattice")
        steps.append(int(round(k)))
    return steps


def _fsum_mean(a: np.ndarray, axis: int) -> np.ndarray:
    """Mean that is exact for constant data and independent of element order."""
    lo = np.min(a, axis=axis, keepdims=True)
    return np.squeeze(lo, axis) + np.apply_along_axis(math.fsum, axis, a - lo) / a.shape[axis]


def _fsum_std(a: np.ndarray, axis: int) -> np.ndarray:
    dev = a - np.expand_dims(_fsum_mean(a, axis), axis)
    return np.sqrt(np.apply_along_axis(math.fsum, axis, dev * dev) / (a.shape[axis] - 1))


def _probe_slices(grid: SimGrid, stride: int):
    return (slice(None), slice(None)) + (slice(None, None, stride),) * grid.d


def _block_values(cfg: SimulationConfig, seed, reps, steps, p_arr, stride, stepper):
    """Probe-averaged |u|^p for each replicate in the block: (R, T, P)."""
    try:
        u, rec = _run_block(cfg.op, cfg.kernel, cfg.measure, cfg.grid, seed, reps, cfg.sigma, cfg.b,
                            cfg.eta, steps, stepper=stepper)
    except BlowUpError:
        if len(reps) == 1:
            raise
        # isolate the offending replicates; the others are unaffected
        parts, bad = [], []
        for r in reps:
            try:
                parts.append(_block_values(cfg, seed, [r], steps, p_arr, stride, stepper)[0])
            except BlowUpError:
                parts.append(None)
                bad.append(r)
        return parts, bad
    pos = [rec.index(s) for s in steps]
    probes = np.abs(u[_probe_slices(cfg.grid, stride)])[:, pos]
    flat = probes.reshape(probes.shape[0], probes.shape[1], -1)
    vals = np.stack([_fsum_mean(flat**p, 2) for p in p_arr], axis=2)
    return list(vals), []


def mc_moments(cfg: SimulationConfig, p_list, times, replicates: int, seed: int,
               threads: int = 1, block: int = 32, probe_stride: int = 4,
               n_boot: int = 400, allow_no_dalang: bool = False) -> MomentReport:
    """E|u(t,x)|^p averaged over spatial probes and replicates.

    Replicates run in fixed blocks, so the numbers do not depend on
    `threads`. Standard errors come from a replicate-level bootstrap with
    a seeded resampling stream.
    """
    if replicates < 2:
        raise ValueError("need at least 2 replicates")
    require_finite_variance(cfg.measure)
    for p in p_list:
        if not math.isfinite(moment_mp(cfg.measure, p)):
            raise MomentGateError(f"m_{p} is infinite")
    _check_dalang(cfg.kernel, allow_no_dalang)
    steps = _record_steps(cfg.grid, times)
    p_arr = [float(p) for p in p_list]
    stepper = Stepper(cfg.op, cfg.kernel, cfg.grid)
    blocks = [list(range(i, min(i + block, replicates))) for i in range(0, replicates, block)]
    job = lambda reps: _block_values(cfg, seed, reps, steps, p_arr, probe_stride, stepper)
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(job, blocks))
    else:
        results = [job(b) for b in blocks]
    per, aborted = [], []
    for vals, bad in results:
        per.extend(vals)
        aborted.extend(bad)
    survivors = [v for v in per if v is not None]
    if len(survivors) < 2:
        raise BlowUpError(-1, f"{len(aborted)} of {replicates} replicates blew up")
    kept = np.stack(survivors)  # (R, T, P)
    R = kept.shape[0]
    est = _fsum_mean(kept, 0)
    gen = _rng.stream(seed, 0, 0, _rng.BOOTSTRAP)
    idx = gen.integers(0, R, size=(n_boot, R))
    boot = _fsum_mean(kept[idx], 1)  # (B, T, P)
    se = _fsum_std(boot, 0)
    s1 = kept.sum(axis=0)
    s2 = (kept**2).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ess = np.where(s2 > 0, s1 * s1 / s2, float(R))
    low = [(float(times[i]), p_arr[j]) for i, j in zip(*np.nonzero(ess < 30))]
    nprobe = int(np.prod([len(range(0, cfg.grid.n, probe_stride))] * cfg.grid.d))
    return MomentReport(list(map(float, times)), p_arr, est, se, R, nprobe, ess, low,
                        sorted(aborted), len(aborted) > 0.01 * replicates, kept, idx)


@dataclass(frozen=True)
class LyapunovEstimate:
    slope: float
    stderr: float
    points: int
    window: tuple[float, float]
    label: str = "finite-horizon growth rate"


def lyapunov_estimate(report: MomentReport, p: float, window: tuple[float, float] | None = None) -> LyapunovEstimate:
    """Least-squares slope of log E|u|^p against t over the window (default: final third)."""
    times = np.asarray(report.times, dtype=float)
    if window is None:
        T = times.max()
        window = (times.min() + 2.0 / 3.0 * (T - times.min()), T)
    lo, hi = window
    sel = (times >= lo - 1e-12) & (times <= hi + 1e-12)
    if sel.sum() < 4:
        raise ValueError(f"need >= 4 time points in window {window}, got {int(sel.sum())}")
    j = list(report.p_values).index(p)
    y = report.estimates[sel, j]
    if np.any(y <= 0):
        raise ValueError("nonpositive moment estimate inside the window")
    x = times[sel]
    slope, se_resid = _ols(x, np.log(y))
    if report.replicate_values is not None and report.bootstrap_index is not None:
        boot = _fsum_mean(report.replicate_values[report.bootstrap_index][:, :, sel, j], 1)  # (B, Tw)
        xm = x - x.mean()
        logs = np.log(np.where(boot > 0, boot, np.nan))
        slopes = (logs - logs.mean(axis=1, keepdims=True)) @ xm / float(xm @ xm)
        slopes = slopes[np.isfinite(slopes)]
        se = float(_fsum_std(slopes, 0)) if slopes.size > 1 else se_resid
    else:
        se = se_resid
    return LyapunovEstimate(float(slope), float(se), int(sel.sum()), (float(lo), float(hi)))


@dataclass(frozen=True)
class Verdict:
    t: float
    estimate: float
    stderr: float
    bound: float
    passed: bool


def compare_bound(report: MomentReport, bound_series, p: float | None = None) -> tuple[list[Verdict], bool]:
    """One-sided check estimate <= bound + 3 stderr at every time of `bound_series`."""
    if p is None:
        if len(report.p_values) != 1:
            raise ValueError("report holds several p; pass p explicitly")
        p = report.p_values[0]
    verdicts = []
    for t, bound in bound_series:
        try:
            est, se = report.estimate(t, p)
        except GridMismatchError:
            raise GridMismatchError(f"bound time {t} is not among the report times") from None
        verdicts.append(Verdict(float(t), est, se, float(bound), bool(est <= bound + 3 * se)))
    return verdicts, all(v.passed for v in verdicts)


def verdicts_to_dicts(verdicts) -> list[dict]:
    return [asdict(v) for v in verdicts]
