"""Command-line interface: ``peakheight <verb> [options]``.

Verbs
-----
params      rho, sigma_tilde and sigma of a 1D model on a t grid
density     peak height density on an x grid, from (rho, sigma_tilde) pairs or a model
kacrice     Monte Carlo Kac-Rice tail estimates
simulate    direct simulation: peak heights and their empirical tail
benchmark   wall time of direct simulation against algorithm 1
reproduce   run a bundled experiment (fig1 ... fig10, table1, table2)

Values given on the command line override the experiment file. Exit codes
are 0 on success, 2 for configuration or input errors and 3 for numerical
failures.
"""

from __future__ import annotations

import argparse
import itertools
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import (
    COMMANDS,
    RunConfig,
    ScaleSpaceModel,
    as_range,
    build_model,
    check_thresholds,
    grid_from_axes,
    load_builtin,
    load_file,
    parse_floats,
    parse_grid,
    section_int,
    thresholds,
)
from .covmodel import ProcessModel
from .csvio import write_csv
from .errors import ConfigError, ContractError, NumericalError, ZeroDenominator
from .fieldsim import GridSpec, empirical_tail, simulate_process_1d, simulate_scale_space
from .kacrice import algorithm1, algorithm2, spec_from_moments_1d
from .peak1d import PeakParams, height_density, height_tail, peak_params
from .scalespace import ScaleSpaceSpec, spec_for_kacrice

DEFAULT_U = np.linspace(-2.0, 4.0, 25)


def _need_1d(model, cmd: str) -> ProcessModel:
    if not isinstance(model, ProcessModel):
        raise ConfigError(f"{cmd} needs a 1D process model")
    return model


def _meta(cfg: RunConfig, **extra) -> dict:
    out = {"command": cfg.command, "seed": cfg.seed}
    out.update(extra)
    return out


# ---------------------------------------------------------------------------
# commands


def cmd_params(cfg: RunConfig, reproducible: bool) -> list[Path]:
    model = _need_1d(cfg.model, "params")
    sec = cfg.section or {}
    if cfg.grid is not None:
        ts = cfg.grid.coords(0)
    else:
        ts = as_range(sec.get("t", {"start": 0.0, "stop": 1.0, "num": 101}), "t")
    rows = []
    for t in ts:
        m = model.moments(float(t))
        p = peak_params(m)
        rows.append((float(t), p.rho, p.sigma_tilde, math.sqrt(m.varX)))
    return [write_csv(cfg.out, "params/1", ("t", "rho", "sigma_tilde", "sigma"), rows,
                      {"command": "params", "model": repr(model)}, reproducible)]


def cmd_density(cfg: RunConfig, reproducible: bool) -> list[Path]:
    sec = cfg.section or {}
    if cfg.grid is not None:
        xs = cfg.grid.coords(0)
    else:
        xs = as_range(sec.get("x", {"start": -4.0, "stop": 6.0, "num": 501}), "x")
    pairs = []
    if cfg.model is not None and "t" in sec:
        model = _need_1d(cfg.model, "density")
        for t in as_range(sec["t"], "t"):
            pairs.append(peak_params(model.moments(float(t))))
    else:
        rhos = as_range(sec.get("rho", -1.0 / math.sqrt(3.0)), "rho")
        sts = as_range(sec.get("sigma_tilde", 1.0), "sigma_tilde")
        pairs = [PeakParams(r, s) for r, s in itertools.product(rhos, sts)]
    rows = []
    for p in pairs:
        f = np.asarray(height_density(p, xs))
        rows.extend((p.rho, p.sigma_tilde, float(x), float(v)) for x, v in zip(xs, f))
    return [write_csv(cfg.out, "density/1", ("rho", "sigma_tilde", "x", "density"), rows,
                      {"command": "density"}, reproducible)]


def _kacrice_scenarios(cfg: RunConfig):
    """``(label, JointGaussianSpec, closed-form params or None)`` per scenario."""
    sec = cfg.section or {}
    model = cfg.model
    out = []
    if isinstance(model, ScaleSpaceModel):
        points = sec.get("points", [[0.0] * model.N + [0.7]])
        for pt in points:
            pt = [float(x) for x in pt]
            if len(pt) != model.N + 1:
                raise ConfigError(f"scale space point {pt} needs {model.N} locations and nu")
            spec = spec_for_kacrice(ScaleSpaceSpec.from_nu(model.N, pt[-1], model.kernel))
            out.append(("t=" + "/".join(f"{x:g}" for x in pt[:-1]) + f" nu={pt[-1]:g}", spec, None))
        return out
    model = _need_1d(model, "kacrice")
    for t in as_range(sec.get("t", 0.5), "t"):
        m = model.moments(float(t))
        out.append((f"t={t:g}", spec_from_moments_1d(m), peak_params(m)))
    return out


def cmd_kacrice(cfg: RunConfig, reproducible: bool) -> list[Path]:
    u = cfg.u if cfg.u is not None else DEFAULT_U
    est = algorithm1 if cfg.algorithm == 1 else algorithm2
    rows, meta = [], _meta(cfg, algorithm=cfg.algorithm, niters=cfg.niters)
    for i, (label, spec, params) in enumerate(_kacrice_scenarios(cfg)):
        # distinct seeds keep scenarios statistically independent
        r = est(spec, u, cfg.niters, cfg.seed + i)
        exact = height_tail(params, u) if params is not None else np.full(u.size, np.nan)
        meta[f"scenario {i}"] = label
        rows.extend((i, a, b, c, d) for a, b, c, d in zip(u, r.tail, r.se, np.atleast_1d(exact)))
    return [write_csv(cfg.out, "kacrice/1", ("scenario", "u", "tail", "se", "closed_form"), rows,
                      meta, reproducible)]


def _simulate(cfg: RunConfig):
    model = cfg.model
    grid = cfg.grid
    sec = cfg.section or {}
    if grid is None and "grid" in sec:
        grid = grid_from_axes(sec["grid"])
    if grid is None:
        raise ConfigError("simulate needs a grid")
    if isinstance(model, ScaleSpaceModel):
        if grid.ndim != model.N + 1:
            raise ConfigError(f"scale space grid needs {model.N} location axes and a nu axis")
        return simulate_scale_space(model.N, GridSpec(grid.axes[:-1]), GridSpec(grid.axes[-1:]),
                                    cfg.nsims, cfg.seed, model.kernel)
    return simulate_process_1d(_need_1d(model, "simulate"), grid, cfg.nsims, cfg.seed)


def tail_path(out: Path) -> Path:
    """Companion path of the empirical-tail CSV written by ``simulate``."""
    out = Path(out)
    return out.with_name(out.stem + "_tail" + (out.suffix or ".csv"))


def cmd_simulate(cfg: RunConfig, reproducible: bool) -> list[Path]:
    s = _simulate(cfg)
    u = cfg.u if cfg.u is not None else DEFAULT_U
    meta = _meta(cfg, nsims=cfg.nsims, n_peaks=len(s))
    rows = [(int(r), *map(float, loc), float(h))
            for r, h, loc in zip(s.realization, s.heights, s.locations)]
    header = ("realization_id",) + tuple(s.axis_names) + ("height",)
    p1 = write_csv(cfg.out, "peaks/1", header, rows,
                   meta, reproducible)
    if len(s):
        tail, se = empirical_tail(s, u)
    else:
        tail = se = np.full(u.size, np.nan)
        meta["note"] = "no peaks recorded; tail undefined"
    p2 = write_csv(tail_path(cfg.out), "tail/1", ("u", "tail", "se"), zip(u, tail, se),
                   meta, reproducible)
    return [p1, p2]


def cmd_benchmark(cfg: RunConfig, reproducible: bool) -> list[Path]:
    model = cfg.model
    if not isinstance(model, ScaleSpaceModel):
        raise ConfigError("benchmark needs a scale_space model")
    sec = cfg.section or {}
    nu = float(sec.get("nu", 0.7))
    t0 = time.perf_counter()
    s = _simulate(cfg)
    t1 = time.perf_counter()
    spec = spec_for_kacrice(ScaleSpaceSpec.from_nu(model.N, nu, model.kernel))
    try:
        algorithm1(spec, cfg.u if cfg.u is not None else DEFAULT_U, cfg.nsims, cfg.seed)
    except ZeroDenominator:
        pass  # a handful of draws may hold no maximum; only the time is reported
    t2 = time.perf_counter()
    rows = [("direct_simulation", cfg.nsims, t1 - t0, len(s)),
            ("kac_rice_algorithm1", cfg.nsims, t2 - t1, float("nan"))]
    return [write_csv(cfg.out, "benchmark/1", ("method", "nsims", "wall_seconds", "n_peaks"), rows,
                      _meta(cfg, ratio=(t1 - t0) / max(t2 - t1, 1e-12)), reproducible)]


RUNNERS = {
    "params": cmd_params,
    "density": cmd_density,
    "kacrice": cmd_kacrice,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
}


# ---------------------------------------------------------------------------
# argument handling


def _resolve(command: str, data: dict | None, args, out: Path) -> RunConfig:
    sec = dict((data or {}).get(command, {}))
    model = build_model(data["model"]) if data and "model" in data else None
    u = check_thresholds(parse_floats(args.u)) if args.u else thresholds(sec)
    grid = parse_grid(args.grid) if args.grid else None
    niters = args.niters if args.niters is not None else section_int(sec, "niters", 100_000)
    nsims = args.nsims if args.nsims is not None else section_int(sec, "nsims", 1000)
    seed = args.seed if args.seed is not None else section_int(sec, "seed", 0)
    algorithm = args.algorithm if args.algorithm is not None else section_int(sec, "algorithm", 1)
    rho, sigma_tilde = getattr(args, "rho", None), getattr(args, "sigma_tilde", None)
    if command == "density" and (rho or sigma_tilde):
        if rho:
            sec["rho"] = list(parse_floats(rho))
        if sigma_tilde:
            sec["sigma_tilde"] = list(parse_floats(sigma_tilde))
        sec.pop("t", None)
    return RunConfig(command, model, out, u, niters, nsims, seed, grid, algorithm, sec)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="peakheight", description="Peak height distributions of Gaussian fields.")
    p.add_argument("--version", action="version", version=f"peakheight {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, out_default):
        sp.add_argument("--model", help="experiment or model file (TOML or JSON)")
        sp.add_argument("--out", default=out_default, help="output CSV path (directory for reproduce)")
        sp.add_argument("--u", help="thresholds: 'a,b,c' or 'start:stop:num'")
        sp.add_argument("--niters", type=int)
        sp.add_argument("--nsims", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--algorithm", type=int, choices=(1, 2))
        sp.add_argument("--grid", help="'start:stop:num' per axis, comma separated")
        sp.add_argument("--reproducible", action="store_true", help="omit the timestamp line")
        sp.add_argument("--workers", type=int, help="threads for Monte Carlo work (results do not change)")

    for verb in COMMANDS:
        sp = sub.add_parser(verb)
        common(sp, f"{verb}.csv")
        if verb == "density":
            sp.add_argument("--rho", help="rho values")
            sp.add_argument("--sigma-tilde", dest="sigma_tilde", help="sigma_tilde values")
    rp = sub.add_parser("reproduce")
    rp.add_argument("experiment", help="bundled experiment id, e.g. fig4 or table2")
    common(rp, ".")
    return p


def run(argv=None) -> list[Path]:
    """Parse ``argv`` and run; returns written paths. Errors propagate."""
    args = build_parser().parse_args(argv)
    if args.workers is not None:
        os.environ["PEAKHEIGHT_WORKERS"] = str(max(1, args.workers))
    if args.verb == "reproduce":
        data = load_builtin(args.experiment)
        outdir = Path(args.out)
        written = []
        for command in data.get("commands", []):
            cfg = _resolve(command, data, args, outdir / f"{args.experiment}_{command}.csv")
            written += RUNNERS[command](cfg, args.reproducible)
        return written
    data = load_file(args.model) if args.model else None
    if (data is None or "model" not in data) and args.verb != "density":
        raise ConfigError(f"{args.verb} needs a model table (--model)")
    cfg = _resolve(args.verb, data, args, Path(args.out))
    return RUNNERS[args.verb](cfg, args.reproducible)


def main(argv=None) -> int:
    try:
        for path in run(argv):
            print(path)
    except ContractError as exc:
        print(f"peakheight: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"peakheight: numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
