"""Batch front end: ``lindley-alt <command> --config <path>``.

The config is one JSON document::

    {
      "a": {"kind": "exponential", "mu": 2.0},
      "b": {"kind": "exp_poly_trig_tail", "tail": [...]},
      "sim": {"n_steps": 1000000, "n_replications": 1, "seed": 0},
      "grid": {"h": 0.001, "x_max": null},
      "tol": 1e-6,
      "curve": {"x_max": 6.0, "n_points": 301},
      "probes": [5.0, 10.0, 15.0],
      "tolerances": {"compare": 0.01, "band": 0.05}
    }

Only ``a`` and ``b`` are required.  Every command writes ``report.json`` and
``fw_curve.csv`` to the output directory; exit status is 0 iff every check
recorded in the report passed.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dists, fpsolve, sim, tails, theorem
from .dists import HypothesisError

COMMANDS = ("simulate", "iterate", "solve", "tail", "compare")

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_ENGINE = 3


class ConfigError(ValueError):
    def __init__(self, where: str, msg: str):
        super().__init__(f"{where}: {msg}")
        self.where = where


@dataclass
class RunConfig:
    command: str
    a_spec: dists.DistSpec
    b_spec: dists.DistSpec
    raw: dict
    out_dir: Path
    n_steps: int = 1_000_000
    n_replications: int = 1
    seed: int = 0
    burn_in: int | None = None
    h: float = 1e-3
    x_max: float | None = None
    tol: float = 1e-6
    curve_x_max: float = 6.0
    curve_points: int = 301
    probes: list | None = None
    compare_tol: float = 0.01
    band: float = tails.DEFAULT_BAND


def _get(d: dict, key: str, where: str, typ, default=None, required=False):
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(f"{where}.{key}" if where else key, "missing required field")
        return default
    val = d[key]
    if typ is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ConfigError(f"{where}.{key}" if where else key, f"expected an integer, got {val!r}")
        return val
    if typ is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            raise ConfigError(f"{where}.{key}" if where else key, f"expected a finite number, got {val!r}")
        return float(val)
    if not isinstance(val, typ):
        raise ConfigError(f"{where}.{key}" if where else key, f"expected {typ.__name__}, got {val!r}")
    return val


def _spec(raw: dict, key: str):
    d = _get(raw, key, "", dict, required=True)
    try:
        return dists.spec_from_dict(d)
    except (KeyError, TypeError) as exc:
        raise ConfigError(key, f"missing or malformed parameter {exc}") from exc
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from exc


def parse_config(text: str, command: str, out_dir: Path, seed: int | None = None) -> RunConfig:
    """Parse and validate a JSON config; errors carry line or field locations."""
    if command not in COMMANDS:
        raise ConfigError("command", f"unknown command {command!r}")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno} column {exc.colno}", exc.msg) from exc
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    cfg = RunConfig(command, _spec(raw, "a"), _spec(raw, "b"), raw, out_dir)

    s = _get(raw, "sim", "", dict, {})
    cfg.n_steps = _get(s, "n_steps", "sim", int, cfg.n_steps)
    cfg.n_replications = _get(s, "n_replications", "sim", int, cfg.n_replications)
    cfg.seed = _get(s, "seed", "sim", int, cfg.seed)
    cfg.burn_in = _get(s, "burn_in", "sim", int, None)
    if seed is not None:
        cfg.seed = seed
    if not 0 <= cfg.seed < 2**64:
        raise ConfigError("sim.seed", "seed must be an unsigned 64-bit integer")
    if cfg.n_steps < 2 or cfg.n_replications < 1:
        raise ConfigError("sim", "need n_steps >= 2 and n_replications >= 1")

    g = _get(raw, "grid", "", dict, {})
    cfg.h = _get(g, "h", "grid", float, cfg.h)
    cfg.x_max = _get(g, "x_max", "grid", float, None)
    if cfg.h <= 0:
        raise ConfigError("grid.h", "grid spacing must be positive")
    cfg.tol = _get(raw, "tol", "", float, cfg.tol)

    c = _get(raw, "curve", "", dict, {})
    cfg.curve_x_max = _get(c, "x_max", "curve", float, cfg.curve_x_max)
    cfg.curve_points = _get(c, "n_points", "curve", int, cfg.curve_points)
    if cfg.curve_x_max <= 0 or cfg.curve_points < 2:
        raise ConfigError("curve", "need x_max > 0 and at least two points")

    probes = _get(raw, "probes", "", list, None)
    if probes is not None:
        try:
            probes = [float(p) for p in probes]
        except (TypeError, ValueError) as exc:
            raise ConfigError("probes", "probes must be numbers") from exc
        if any(b <= a for a, b in zip(probes, probes[1:])) or not probes:
            raise ConfigError("probes", "probes must be a nonempty increasing list")
    cfg.probes = probes

    t = _get(raw, "tolerances", "", dict, {})
    cfg.compare_tol = _get(t, "compare", "tolerances", float, cfg.compare_tol)
    cfg.band = _get(t, "band", "tolerances", float, cfg.band)
    return cfg


# -- report plumbing ---------------------------------------------------------

@dataclass
class Report:
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def check(self, name: str, passed: bool, **detail):
        self.checks[name] = {"passed": bool(passed), **detail}

    @property
    def failures(self) -> list:
        return sorted(k for k, v in self.checks.items() if not v["passed"])

    @property
    def ok(self) -> bool:
        return not self.failures and not self.errors

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "checks": self.checks,
            "failures": self.failures,
            "errors": self.errors,
            "notes": self.notes,
            "timings_s": self.timings,
            "passed": self.ok,
        }


def _plain(obj):
    """Convert numpy values to JSON types; non-finite floats become None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps_report(report: Report) -> str:
    return json.dumps(_plain(report.to_dict()), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_csv(header: str, cols) -> str:
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join(f"{float(v):.17g}" for v in row))
    return "\n".join(lines) + "\n"


class _Timer:
    def __init__(self, report: Report, name: str):
        self.report, self.name = report, name

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.report.timings[self.name] = time.perf_counter() - self.t0
        return False


# -- engines -----------------------------------------------------------------

def _curve_x(cfg: RunConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.curve_x_max, cfg.curve_points)


def _run_sim(cfg: RunConfig, rep: Report):
    scfg = sim.SimConfig(
        cfg.a_spec,
        cfg.b_spec,
        cfg.n_steps,
        n_replications=cfg.n_replications,
        burn_in=cfg.burn_in,
        seed=cfg.seed,
    )
    with _Timer(rep, "simulate"):
        summary = sim.simulate(scfg)
    rep.results["simulate"] = summary.to_dict()
    rho = dists.prob_x_positive(cfg.a_spec, cfg.b_spec)
    if rho < 1.0:
        cb = sim.cycle_bound_check(summary, rho)
        rep.results["cycle_bound"] = cb.to_dict()
        rep.check("cycle_bound", cb.passed)
    return summary


def _run_iterate(cfg: RunConfig, rep: Report):
    with _Timer(rep, "iterate"):
        res, x_rep = fpsolve.solve_specs(cfg.a_spec, cfg.b_spec, h=cfg.h, tol=cfg.tol, x_max=cfg.x_max)
    rep.results["iterate"] = {
        "pi0": float(res.f.values[0]),
        "iterations": res.iterations,
        "rho": x_rep.rho,
        "x_max": x_rep.grid.x_max,
        "h": x_rep.grid.h,
        "last_step": res.last_step,
        "error_bound": res.error_bound,
        "gap_bound": res.gap_bound,
    }
    rep.check("iterate_converged", res.gap_bound <= cfg.tol, gap_bound=res.gap_bound, tol=cfg.tol)
    return res, x_rep


def _run_solve(cfg: RunConfig, rep: Report):
    with _Timer(rep, "solve"):
        sol, w = theorem.closed_form(cfg.a_spec, cfg.b_spec)
    rep.results["solve"] = {**sol.to_dict(), "closed_form": w.to_dict()}
    rep.check(
        "solve_validation",
        sol.max_validation_residual <= theorem.VALIDATION_TOL,
        max_residual=sol.max_validation_residual,
    )
    return w


def cmd_simulate(cfg: RunConfig, rep: Report, files: dict):
    summary = _run_sim(cfg, rep)
    x = _curve_x(cfg)
    files["fw_curve.csv"] = format_csv("x,F", [x, summary.ecdf(x)])
    files["ecdf.csv"] = format_csv("x,F", [summary.ecdf_x, summary.ecdf_f])


def cmd_iterate(cfg: RunConfig, rep: Report, files: dict):
    res, _ = _run_iterate(cfg, rep)
    x = _curve_x(cfg)
    files["fw_curve.csv"] = format_csv("x,F", [x, res.f(x)])


def cmd_solve(cfg: RunConfig, rep: Report, files: dict):
    w = _run_solve(cfg, rep)
    x = _curve_x(cfg)
    f = w.cdf(x)
    rep.results["solve"]["cdf_at_0"] = float(f[0])
    rep.check("curve_monotone", bool(np.all(np.diff(f) >= -1e-12)))
    files["fw_curve.csv"] = format_csv("x,F", [x, f])


def cmd_tail(cfg: RunConfig, rep: Report, files: dict):
    regime = tails.classify(cfg.b_spec)
    probes = cfg.probes
    if probes is None:
        probes = tails.default_probes(cfg.a_spec, cfg.b_spec).tolist()
    x_rep = None
    with _Timer(rep, "tail"):
        if isinstance(regime, tails.RegularlyVarying):
            rep.results["regime"] = {"kind": "regularly_varying", "kappa": regime.kappa}
            try:
                _, w = theorem.closed_form(cfg.a_spec, cfg.b_spec)
            except HypothesisError as exc:
                rep.notes.append(f"closed form unavailable ({exc}); using the fixed-point solution")
                w, x_rep = fpsolve.solve_specs(
                    cfg.a_spec, cfg.b_spec, h=cfg.h, tol=cfg.tol, x_max=max(probes) * 1.05
                )
            report = tails.regvar_check(w, cfg.a_spec, cfg.b_spec, regime.kappa, probes, cfg.band, x_rep)
            if report.extra.get("dominant_oscillates"):
                rep.notes.append(
                    "the dominant exponential rate of the tail of B carries sin/cos terms; "
                    "the tail ratio oscillates and need not settle"
                )
        else:
            rep.results["regime"] = {"kind": "rapidly_varying"}
            w, x_rep = fpsolve.solve_specs(
                cfg.a_spec, cfg.b_spec, h=cfg.h, tol=cfg.tol, x_max=max(probes) * 1.05
            )
            report = tails.rapidvar_check(w, cfg.a_spec, cfg.b_spec, probes, cfg.band, x_rep)
            rep.check("liminf_direction", report.extra["liminf_ok"])
    rep.results["tail"] = report.to_dict()
    rep.notes.append(f"tail pass band of +-{cfg.band:g} at the deepest probe is a package convention")
    rep.check("tail_ratio", report.passed)
    files["ratio_curve.csv"] = format_csv("x,ratio", [report.probes, report.ratios])
    x = _curve_x(cfg)
    fw = w.cdf(x) if isinstance(w, theorem.ClosedFormW) else w.f(x)
    files["fw_curve.csv"] = format_csv("x,F", [x, fw])


def cmd_compare(cfg: RunConfig, rep: Report, files: dict):
    summary = _run_sim(cfg, rep)
    res, _ = _run_iterate(cfg, rep)
    curves = {}
    # compare on the simulation's ECDF nodes, where the step ECDF is exact
    x = summary.ecdf_x
    curves["simulate"] = summary.ecdf_f
    curves["iterate"] = res.f(x)
    try:
        w = _run_solve(cfg, rep)
        curves["solve"] = w.cdf(x)
    except HypothesisError as exc:
        rep.notes.append(f"closed-form engine excluded: {exc}")
        rep.results["solve"] = {"excluded": True, "reason": str(exc)}
    names = sorted(curves)
    table = {}
    for i, n1 in enumerate(names):
        for n2 in names[i + 1:]:
            table[f"{n1}~{n2}"] = float(np.max(np.abs(curves[n1] - curves[n2])))
    rep.results["sup_distance"] = table
    worst = max(table.values()) if table else 0.0
    rep.check("engines_agree", worst <= cfg.compare_tol, max_sup_distance=worst, tol=cfg.compare_tol)
    xc = _curve_x(cfg)
    ref = "solve" if "solve" in curves else "iterate"
    fw = w.cdf(xc) if ref == "solve" else res.f(xc)
    files["fw_curve.csv"] = format_csv("x,F", [xc, fw])
    files["ecdf.csv"] = format_csv("x,F", [summary.ecdf_x, summary.ecdf_f])


HANDLERS = {
    "simulate": cmd_simulate,
    "iterate": cmd_iterate,
    "solve": cmd_solve,
    "tail": cmd_tail,
    "compare": cmd_compare,
}


def run(cfg: RunConfig) -> Report:
    """Execute one command and write its outputs; returns the report."""
    rep = Report(cfg.command, _plain(cfg.raw))
    rep.config["seed_used"] = cfg.seed
    files: dict = {}
    t0 = time.perf_counter()
    try:
        HANDLERS[cfg.command](cfg, rep, files)
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        rep.errors.append({"type": type(exc).__name__, "message": str(exc)})
    rep.timings["total"] = time.perf_counter() - t0
    for name, text in files.items():
        _atomic_write(cfg.out_dir / name, text)
    _atomic_write(cfg.out_dir / "report.json", dumps_report(rep))
    return rep


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lindley-alt", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=Path("."))
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = args.config.read_text(encoding="utf-8")
        cfg = parse_config(text, args.command, args.out, args.seed)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rep = run(cfg)
    if not args.quiet:
        for name, chk in sorted(rep.checks.items()):
            print(f"{'PASS' if chk['passed'] else 'FAIL'}  {name}")
        for err in rep.errors:
            print(f"ERROR {err['type']}: {err['message']}", file=sys.stderr)
        for note in rep.notes:
            print(f"note: {note}")
        print(f"report: {cfg.out_dir / 'report.json'}")
    if rep.errors:
        return EXIT_ENGINE
    return EXIT_OK if rep.ok else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
