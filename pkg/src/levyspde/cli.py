"""Command-line front end: `levyspde SUBCOMMAND --config PATH [...]`.

Each subcommand writes summary.json, tables/*.csv, plots/*.svg and a
MANIFEST.json into the output directory. Exit codes: 0 success, 2 config
error, 3 math gate (infinite m_p, Dalang failure, divergent integral),
4 numerical abort. Failures print one `reason=<slug> <detail>` line to stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bounds import (
    a_beta_p, anderson_second_moment, beta_star, fit_loglog, intermittency_check, j_p_bound,
    j_p_numeric, linear_moment_bound, m_p,
)
from .config import ExperimentConfig, load_config
from .errors import (
    BlowUpError, ConfigError, DalangError, DivergenceError, DomainError, FiniteVarianceError,
    GridMismatchError, LevySpdeError, MomentGateError, UnsupportedError,
)
from .estimate import compare_bound, lyapunov_estimate, mc_moments
from .noise import empirical_cell_moments, measure_to_dict, moment_mp, rosenthal_constant
from .simulate import simulate_nonlinear
from .svg import Series, line_plot

SUBCOMMANDS = ("noise-check", "bounds", "simulate", "moments", "anderson-series", "intermittency", "report")
EXIT_CONFIG, EXIT_GATE, EXIT_ABORT = 2, 3, 4
_GATE_ERRORS = (FiniteVarianceError, MomentGateError, DalangError, DivergenceError, DomainError)
_CONFIG_ERRORS = (ConfigError, GridMismatchError, UnsupportedError)


class Artifacts:
    """Collects summary entries, CSV tables and SVG plots before writing."""

    def __init__(self):
        self.summary: dict = {}
        self.tables: dict[str, tuple[list[str], list[list]]] = {}
        self.plots: dict[str, str] = {}
        self.files: dict[str, bytes] = {}
        self.abort: str | None = None


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_bytes(header: list[str], rows: list[list]) -> bytes:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue().encode("utf-8")


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    return x


def _safe(fn, *args, **kw):
    """Value of fn, or (inf, note) when a math gate says the quantity is infinite/undefined."""
    try:
        return fn(*args, **kw), None
    except DivergenceError as e:
        return math.inf, str(e)
    except (UnsupportedError, DomainError) as e:
        return math.nan, str(e)


# ------------------------------------------------------------ subcommands


def cmd_noise_check(cfg: ExperimentConfig, threads: int, art: Artifacts):
    a = cfg.analysis
    chk = empirical_cell_moments(cfg.measure, a.noise_cells, a.noise_cell_volume, cfg.seed)
    m2 = moment_mp(cfg.measure, 2)
    m4 = moment_mp(cfg.measure, 4)
    rows = [["m2", chk.m2_empirical, chk.m2_stderr, m2],
            ["m4", chk.m4_empirical, chk.m4_stderr, m4],
            ["mean", chk.mean_empirical, None, 0.0]]
    gates = []
    for p in sorted(set(a.p) | {2.0, 4.0}):
        mp = moment_mp(cfg.measure, p)
        ok = math.isfinite(mp)
        cp = rosenthal_constant(p, m2, mp, a.Bp or 2.0 * p) if ok else math.inf
        gates.append({"p": p, "m_p": mp, "rosenthal_constant": cp, "gate": "pass" if ok else "fail"})
    art.summary["noise_check"] = {
        "measure": measure_to_dict(cfg.measure), "cells": chk.cells, "cell_volume": chk.volume,
        "m2_empirical": chk.m2_empirical, "m2_stderr": chk.m2_stderr, "m2_exact": m2,
        "m2_relative_error": abs(chk.m2_empirical / m2 - 1),
        "m4_empirical": chk.m4_empirical, "m4_stderr": chk.m4_stderr, "m4_exact": m4,
        "rosenthal_gates": gates,
    }
    art.tables["noise"] = (["quantity", "empirical", "stderr", "exact"], rows)
    art.tables["rosenthal"] = (["p", "m_p", "rosenthal_constant", "gate"],
                               [[g["p"], g["m_p"], g["rosenthal_constant"], g["gate"]] for g in gates])


def cmd_bounds(cfg: ExperimentConfig, threads: int, art: Artifacts):
    a = cfg.analysis
    op, kernel = cfg.op, cfg.kernel
    ts = sorted(a.bound_times)
    rows, fits, notes = [], [], []
    for p in a.p:
        jps = []
        for t in ts:
            jp, n1 = _safe(j_p_numeric, op, kernel, t, p)
            jb, n2 = _safe(lambda: j_p_bound(op, kernel, t, p).value)
            Mp, n3 = _safe(m_p, op, kernel, t, p)
            lb, n4 = _safe(lambda: min(linear_moment_bound(op, kernel, cfg.measure, p, t, a.Bp, v)
                                       for v in ("t-free", "t-dependent")))
            notes += [n for n in (n1, n2, n3, n4) if n and n not in notes]
            rows.append([t, p, jp, jb, Mp, lb])
            jps.append(jp)
        good = [(t, v) for t, v in zip(ts, jps) if math.isfinite(v) and v > 0]
        if len(good) >= 2:
            slope, se = fit_loglog(*zip(*good))
            fits.append({"p": p, "slope": slope, "stderr": se})
            xs, ys = zip(*good)
            c = math.exp(float(np.mean(np.log(ys)) - slope * np.mean(np.log(xs))))
            art.plots[f"jp_p{p:g}"] = line_plot(
                [Series("J_p numeric", list(xs), list(ys), markers=True),
                 Series(f"fit slope {slope:.4f}", list(xs), [c * x**slope for x in xs], dashed=True)],
                f"J_p(t), p={p:g}", "t", "J_p(t)", logx=True, logy=True)
    art.tables["jp"] = (["t", "p", "jp_numeric", "jp_bound", "Mp", "linear_bound"], rows)
    lip = cfg.model.sigma.lipschitz
    bstar, brows = [], []
    for p in a.p:
        bs = beta_star(op, kernel, cfg.measure, p, lip, a.Bp)
        bstar.append({"p": p, "beta_star": bs.value, "flag": bs.flag, "lipschitz": lip})
        for beta in a.beta_grid:
            ab = a_beta_p(op, kernel, beta, p)
            brows.append([beta, p, ab.value, ab.tail_bound, ab.error])
    art.tables["a_beta"] = (["beta", "p", "A_beta_p", "tail_bound", "quad_error"], brows)
    art.summary["bounds"] = {"fitted_exponents": fits, "beta_star": bstar, "notes": notes,
                             "Bp": a.Bp, "times": ts}


def cmd_simulate(cfg: ExperimentConfig, threads: int, art: Artifacts, allow_no_dalang: bool):
    g = cfg.grid
    steps = [int(round(t / g.dt)) for t in cfg.analysis.times]
    series = simulate_nonlinear(cfg.op, cfg.kernel, cfg.measure, cfg.model.sigma, cfg.model.b,
                                cfg.model.eta, g, (cfg.seed, 0), steps, cfg.model.kind, allow_no_dalang)
    rows = []
    for t, u in zip(series.times, series.values):
        rows.append([float(t), float(np.mean(u)), float(np.mean(u * u)), float(np.max(np.abs(u)))])
    art.tables["field_stats"] = (["t", "mean", "mean_square", "max_abs"], rows)
    buf = io.BytesIO()
    buf.write(np.ascontiguousarray(series.values, dtype="<f8").tobytes())
    art.files["fields/field.bin"] = buf.getvalue()
    meta = {"format": "float64-le-row-major", "shape": list(series.values.shape),
            "times": series.times.tolist(), "grid": g.to_dict(), "model": series.model,
            "eta": series.eta, "seed_key": list(series.seed_key)}
    art.files["fields/field.json"] = (json.dumps(meta, indent=2, sort_keys=True) + "\n").encode()
    art.summary["simulate"] = {"replicate": 0, "records": len(rows), "final_mean_square": rows[-1][2]}


def _linear_bound(cfg, p, t):
    if t == 0:
        return 0.0
    return min(linear_moment_bound(cfg.op, cfg.kernel, cfg.measure, p, t, cfg.analysis.Bp, v)
               for v in ("t-free", "t-dependent"))


def cmd_moments(cfg: ExperimentConfig, threads: int, art: Artifacts, allow_no_dalang: bool):
    a = cfg.analysis
    rep = mc_moments(cfg.simulation(), a.p, a.times, a.replicates, cfg.seed, threads=threads,
                     block=a.block, probe_stride=a.probe_stride, n_boot=a.bootstrap,
                     allow_no_dalang=allow_no_dalang)
    rows, verdicts = [], {}
    for j, p in enumerate(rep.p_values):
        bounds = []
        if cfg.model.kind == "linear":
            for t in rep.times:
                b, _ = _safe(_linear_bound, cfg, p, t)
                bounds.append((t, b))
            vs, ok = compare_bound(rep, bounds, p)
            verdicts[f"{p:g}"] = ok
        for i, t in enumerate(rep.times):
            b = bounds[i][1] if bounds else None
            verdict = None if not bounds else ("pass" if vs[i].passed else "fail")
            rows.append([t, p, rep.estimates[i, j], rep.stderr[i, j], b, verdict])
        art.plots[f"moments_p{p:g}"] = line_plot(
            [Series("MC estimate", rep.times, list(rep.estimates[:, j]), markers=True, err=list(rep.stderr[:, j]))]
            + ([Series("linear bound", rep.times, [b for _, b in bounds], dashed=True)] if bounds else []),
            f"E|u(t,x)|^p, p={p:g}", "t", "moment", logy=bool(bounds))
    art.tables["moments"] = (["t", "p", "estimate", "stderr", "bound", "verdict"], rows)
    growth = []
    for p in rep.p_values:
        try:
            ly = lyapunov_estimate(rep, p, a.lyapunov_window)
        except ValueError as e:
            growth.append({"p": p, "skipped": str(e)})
            continue
        growth.append({"p": p, "slope": ly.slope, "stderr": ly.stderr, "points": ly.points,
                       "window": list(ly.window), "label": ly.label})
        j = rep.p_values.index(p)
        sel = [i for i, t in enumerate(rep.times) if ly.window[0] - 1e-12 <= t <= ly.window[1] + 1e-12]
        xs = [rep.times[i] for i in sel]
        ys = [float(rep.estimates[i, j]) for i in sel]
        c = float(np.mean(np.log(ys)) - ly.slope * np.mean(xs))
        art.plots[f"growth_p{p:g}"] = line_plot(
            [Series("MC estimate", xs, ys, markers=True),
             Series(f"slope {ly.slope:.4f} +- {ly.stderr:.4f}", xs, [math.exp(c + ly.slope * x) for x in xs],
                    dashed=True)],
            f"growth regression, p={p:g}", "t", "E|u|^p", logy=True)
    art.summary["moments"] = {
        "replicates": rep.replicates, "probes": rep.probes, "aborted": rep.aborted,
        "abort_flag": rep.abort_flag, "low_ess": rep.low_ess, "bound_verdicts": verdicts,
        "growth_rates": growth, "report": rep.to_dict(),
    }
    if rep.abort_flag:
        art.abort = f"{len(rep.aborted)} of {a.replicates} replicates blew up"


def cmd_anderson_series(cfg: ExperimentConfig, threads: int, art: Artifacts):
    a = cfg.analysis
    t = a.chaos_time or cfg.grid.horizon
    res = anderson_second_moment(cfg.op, cfg.kernel, cfg.measure, cfg.model.lam, cfg.model.eta, t,
                                 a.n_max, a.chaos_samples, cfg.seed, threads=threads)
    art.tables["chaos"] = (["n", "term", "stderr"], [list(x) for x in res.terms])
    art.summary["anderson_series"] = json.loads(res.to_json())


def cmd_intermittency(cfg: ExperimentConfig, threads: int, art: Artifacts):
    lam = abs(cfg.model.lam)
    w = intermittency_check(cfg.op, cfg.kernel, cfg.measure, lam, cfg.analysis.search)
    bs = beta_star(cfg.op, cfg.kernel, cfg.measure, 2.0, lam, cfg.analysis.Bp)
    upper = 2 * bs.value
    art.summary["intermittency"] = {
        "intermittent_lower_bound": w.intermittent_lb, "witness_a": w.witness_a,
        "witness_beta": w.witness_beta, "threshold": w.threshold, "beta_star": bs.value,
        "beta_star_flag": bs.flag, "growth_upper_bound": upper,
    }
    art.tables["intermittency"] = (["quantity", "value"], [
        ["witness_beta", w.witness_beta], ["witness_a", None if w.witness_a is None else w.witness_a[0]],
        ["threshold", w.threshold], ["beta_star", bs.value], ["growth_upper_bound", upper]])


def run_subcommand(cfg: ExperimentConfig, sub: str, threads: int = 1, allow_no_dalang: bool = False) -> Artifacts:
    art = Artifacts()
    if sub == "noise-check":
        cmd_noise_check(cfg, threads, art)
    elif sub == "bounds":
        cmd_bounds(cfg, threads, art)
    elif sub == "simulate":
        cmd_simulate(cfg, threads, art, allow_no_dalang)
    elif sub == "moments":
        cmd_moments(cfg, threads, art, allow_no_dalang)
    elif sub == "anderson-series":
        cmd_anderson_series(cfg, threads, art)
    elif sub == "intermittency":
        cmd_intermittency(cfg, threads, art)
    elif sub == "report":
        cmd_bounds(cfg, threads, art)
        cmd_moments(cfg, threads, art, allow_no_dalang)
        if cfg.model.kind == "anderson":
            cmd_anderson_series(cfg, threads, art)
            cmd_intermittency(cfg, threads, art)
    else:
        raise ConfigError(f"unknown subcommand {sub!r}")
    return art


# ---------------------------------------------------------------- output


def write_outputs(out: Path, cfg: ExperimentConfig, sub: str, art: Artifacts, threads: int,
                  allow_no_dalang: bool, wall: float) -> dict:
    files: dict[str, bytes] = {}
    summary = {"subcommand": sub, "seed": cfg.seed, "config_sha256": cfg.digest(), **art.summary}
    files["summary.json"] = (json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n").encode()
    for name, (header, rows) in art.tables.items():
        files[f"tables/{name}.csv"] = csv_bytes(header, rows)
    for name, svg in art.plots.items():
        files[f"plots/{name}.svg"] = svg.encode("utf-8")
    files.update(art.files)
    for rel, data in files.items():
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    manifest = {
        "manifest_version": 1,
        "subcommand": sub,
        "seed": cfg.seed,
        "threads": threads,
        "allow_no_dalang": allow_no_dalang,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "versions": {"levyspde": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "wall_time_s": wall,
        "outputs": {rel: hashlib.sha256(data).hexdigest() for rel, data in sorted(files.items())},
    }
    (out / "MANIFEST.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH",
                        help="experiment JSON, or a MANIFEST.json from an earlier run")
    common.add_argument("--seed", type=int, default=None, help="unsigned 64-bit seed (overrides config)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for replicate blocks")
    common.add_argument("--out", default=None, metavar="DIR", help="output directory (overrides config)")
    common.add_argument("--allow-no-dalang", action="store_true",
                        help="diagnostic mode: proceed when the Dalang condition fails")
    parser = argparse.ArgumentParser(prog="levyspde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _fail(code: int, reason: str, detail: str) -> int:
    print(f"reason={reason} {detail}".strip(), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # argparse already printed usage; map its failures to the config exit code
        return EXIT_CONFIG if e.code else 0
    t0 = time.perf_counter()
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg, _ = load_config(args.config, args.subcommand, args.allow_no_dalang, args.seed)
        out = Path(args.out or cfg.output)
        art = run_subcommand(cfg, args.subcommand, args.threads, args.allow_no_dalang)
        write_outputs(out, cfg, args.subcommand, art, args.threads, args.allow_no_dalang,
                      time.perf_counter() - t0)
    except _CONFIG_ERRORS as e:
        return _fail(EXIT_CONFIG, e.reason, str(e))
    except _GATE_ERRORS as e:
        return _fail(EXIT_GATE, e.reason, str(e))
    except BlowUpError as e:
        return _fail(EXIT_ABORT, e.reason, str(e))
    except LevySpdeError as e:
        return _fail(EXIT_CONFIG, e.reason, str(e))
    if art.abort:
        return _fail(EXIT_ABORT, BlowUpError.reason, art.abort)
    return 0


if __name__ == "__main__":
    sys.exit(main())
